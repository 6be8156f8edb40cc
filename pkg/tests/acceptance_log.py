"""Collects acceptance-criterion outcomes for the terminal summary."""

# criterion number -> list of (label, ok, detail)
ACCEPTANCE: dict[int, list] = {}


def record(criterion: int, label: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion} [{label}] {detail}")
    return bool(ok)
