// Audible cues for emergency and medication alerts.

export type Beeper = (kind: string) => void;

/** WebAudio beeper: two tones, urgent for EMERGENCY, soft for reminders. */
export function webAudioBeeper(): Beeper {
  let ctx: AudioContext | null = null;
  return (kind: string) => {
    try {
      ctx = ctx ?? new AudioContext();
      const osc = ctx.createOscillator();
      const gain = ctx.createGain();
      osc.frequency.value = kind === "EMERGENCY" ? 880 : 523;
      gain.gain.value = 0.2;
      osc.connect(gain).connect(ctx.destination);
      const now = ctx.currentTime;
      osc.start(now);
      osc.stop(now + (kind === "EMERGENCY" ? 0.6 : 0.25));
    } catch {
      // audio is best-effort; autoplay policies may block it until a gesture
    }
  };
}
