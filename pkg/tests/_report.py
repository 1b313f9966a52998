"""Shared store for acceptance-criterion outcomes, printed by conftest."""

LINES: dict[int, str] = {}


def record(number: int, passed: bool, text: str) -> bool:
    line = f"A{number} {'PASS' if passed else 'FAIL'}: {text}"
    LINES[number] = line
    print(line)
    return passed
