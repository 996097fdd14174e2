"""Collects one verdict line per acceptance criterion for the terminal summary."""

RESULTS: dict = {}


def record(number: int, title: str, passed: bool, detail: str = "") -> str:
    line = f"CRITERION {number} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f" :: {detail}"
    RESULTS[number] = line
    print(line)
    return line
