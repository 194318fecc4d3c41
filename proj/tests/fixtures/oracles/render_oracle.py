"""Independent renderer for single-function integer programs.

Usage: render_oracle.py {next,code_executor,concise} SOURCE INVOCATION > golden
"""
import sys

MARK = "  # [trace] "
MAX = 8


def main():
    mode, path, invocation = sys.argv[1], sys.argv[2], sys.argv[3]
    source = open(path).read()
    code = compile(source, "<subject>", "exec")
    ns = {}
    exec(code, ns)

    log = []  # (line, kind, state-after)
    state = {"prev": None, "line": None}

    def snap(frame):
        return {k: repr(v) for k, v in frame.f_locals.items()}

    def local(frame, event, arg):
        if state["line"] is not None:
            log.append((state["line"], "line", snap(frame)))
            state["line"] = None
        if event == "line":
            state["line"] = frame.f_lineno
        elif event == "return":
            s = snap(frame)
            s["__return__"] = repr(arg)
            log.append((frame.f_lineno, "return", s))
        return local

    def glob(frame, event, arg):
        if frame.f_code.co_filename != "<subject>":
            return None
        log.append((frame.f_lineno, "call", snap(frame)))
        return local

    sys.settrace(glob)
    eval(invocation, ns)
    sys.settrace(None)

    if mode != "next":
        rows = []
        prev = {}
        for line, kind, s in log:
            changed = [k for k in s if prev.get(k) != s[k]]
            prev = s
            if kind != "line":
                continue
            names = list(s) if mode == "code_executor" else changed
            state = ", ".join(k + "=" + s[k] for k in names)
            rows.append(str(line) + ":" + (" " + state if state else ""))
        sys.stdout.write("\n".join(rows))
        return

    chains = {}
    executed = set()
    prev = {}
    for line, kind, s in log:
        executed.add(line)
        changed = [k for k in s if prev.get(k) != s[k]]
        prev = s
        per = chains.setdefault(line, {})
        for k in changed:
            if kind == "return" and k != "__return__":
                continue
            if kind != "return" and k == "__return__":
                continue
            name = "return" if k == "__return__" else k
            per.setdefault(name, []).append(s[k])

    out = []
    for no, text in enumerate(source.split("\n"), start=1):
        if no not in executed:
            out.append(text)
            continue
        parts = []
        for name, vals in chains.get(no, {}).items():
            shown = vals[: MAX + 1]
            chain = name + "=" + " → ".join(shown)
            if len(vals) > len(shown):
                chain += " → …"
            parts.append(chain)
        out.append(text + MARK + ("; ".join(parts) if parts else "(no change)"))
    sys.stdout.write("\n".join(out))


main()
