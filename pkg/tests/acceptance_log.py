"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES = []


def record(label, passed, detail=""):
    line = f"{'PASS' if passed else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
    LINES.append(line)
    print(line)
    return passed
