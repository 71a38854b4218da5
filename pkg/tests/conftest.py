def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance check, in numeric order."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "acceptance" not in props:
                continue
            ok = outcome == "passed" and rep.when == "call"
            # a failure in any phase wins over a passing call
            if props["acceptance"] in lines and not ok:
                pass
            elif props["acceptance"] in lines:
                continue
            lines[props["acceptance"]] = f"{'PASS' if ok else 'FAIL'}  {props['acceptance']}  {props.get('detail', '')}"
    if lines:
        terminalreporter.section("acceptance")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key].rstrip())
