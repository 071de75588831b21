"""Collects one pass/fail line per acceptance criterion."""

LINES = []


def record(number, title, passed, detail, seconds):
    line = f"criterion {number} {'PASS' if passed else 'FAIL'} {title}: {detail} ({seconds:.1f}s)"
    LINES.append(line)
    print(line)
    return passed
