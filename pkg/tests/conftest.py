import pytest

from carebot.config import SimConfig, build_robot_model
from carebot.world import load_scenario


def grid_scenario(rows: list[str], temp_c: float = 20.0, seed: int = 1,
                  cell_size: float = 0.1) -> str:
    header = f"temp_c={temp_c}\nseed={seed}\ncell_size={cell_size}\n"
    return header + "\n".join(rows) + "\n"


def open_room(size: int = 12, r_row: int | None = None, r_col: int | None = None) -> str:
    """Square room scenario text with the robot somewhere inside."""
    r_row = size // 2 if r_row is None else r_row
    r_col = size // 2 if r_col is None else r_col
    rows = []
    for r in range(size):
        if r in (0, size - 1):
            rows.append("#" * size)
        else:
            row = ["#"] + ["."] * (size - 2) + ["#"]
            if r == r_row:
                row[r_col] = "R"
            rows.append("".join(row))
    return grid_scenario(rows)


@pytest.fixture
def cfg():
    return SimConfig()


@pytest.fixture
def model(cfg):
    return build_robot_model(cfg)


@pytest.fixture
def room_world():
    return load_scenario(open_room(12))
