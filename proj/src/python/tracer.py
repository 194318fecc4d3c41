# Copyright 2026 The tracescale Authors
# SPDX-License-Identifier: Apache-2.0
#
# Child-side harness. Reads one JSON request from stdin, runs the subject
# program under sys.settrace and writes one JSON response line to fd 3.
# Events are post-state: a line event carries the frame's bindings observed
# at the next trace callback of the same frame.

import _json
import _signal
import builtins
import io
import math
import sys
import time

SUBJECT = "<subject>"
ELLIPSIS = "…"
PLACEHOLDER = "<unrepresentable>"
MAX_DEPTH = 3


class WallTimeExceeded(BaseException):
    pass


def _clip(text, width):
    if len(text) > width:
        return text[:width] + ELLIPSIS
    return text


class Renderer:
    def __init__(self, limits):
        self.width = int(limits["max_value_width"])
        self.max_items = int(limits["max_container_elements"])

    def render(self, value):
        try:
            return _clip(self._render(value, 0), self.width)
        except BaseException:
            return PLACEHOLDER

    def _items(self, rendered, total):
        body = ", ".join(rendered)
        if total > len(rendered):
            body = body + ", " + ELLIPSIS if body else ELLIPSIS
        return body

    def _seq(self, value, depth):
        out = []
        for i, item in enumerate(value):
            if i >= self.max_items:
                break
            out.append(self._render(item, depth + 1))
        return out

    def _render(self, value, depth):
        if value is None or isinstance(value, (bool, int)):
            return repr(value)
        if isinstance(value, float):
            if math.isnan(value):
                return "nan"
            return repr(value)
        if isinstance(value, (str, bytes)):
            return repr(value)
        t = type(value)
        if t is list or t is tuple:
            open_, close = ("[", "]") if t is list else ("(", ")")
            if depth >= MAX_DEPTH:
                return open_ + ELLIPSIS + close
            items = self._seq(value, depth)
            if t is tuple and len(value) == 1:
                return "(" + items[0] + ",)"
            return open_ + self._items(items, len(value)) + close
        if t is set or t is frozenset:
            if not value:
                return "set()" if t is set else "frozenset()"
            if depth >= MAX_DEPTH:
                body = "{" + ELLIPSIS + "}"
            else:
                items = sorted(self._render(v, depth + 1) for v in value)
                body = "{" + self._items(items[: self.max_items], len(items)) + "}"
            return body if t is set else "frozenset(" + body + ")"
        if t is dict:
            if depth >= MAX_DEPTH:
                return "{" + ELLIPSIS + "}"
            pairs = sorted(
                ((self._render(k, depth + 1), v) for k, v in value.items()),
                key=lambda kv: kv[0],
            )
            shown = [k + ": " + self._render(v, depth + 1) for k, v in pairs[: self.max_items]]
            return "{" + self._items(shown, len(pairs)) + "}"
        if isinstance(value, type):
            return "<class " + value.__name__ + ">"
        if t.__name__ == "module":
            return "<module " + value.__name__ + ">"
        if t.__name__ in ("function", "builtin_function_or_method", "method"):
            return "<function " + getattr(value, "__qualname__", "?") + ">"
        if t.__name__ == "generator":
            return "<generator " + value.__qualname__ + ">"
        if t.__repr__ is object.__repr__:
            return "<" + t.__name__ + " object>"
        return repr(value)


def _global_stores(code, cache={}):
    names = cache.get(code)
    if names is None:
        import dis

        names = tuple(
            ins.argval for ins in dis.get_instructions(code)
            if ins.opname in ("STORE_GLOBAL", "DELETE_GLOBAL")
        )
        cache[code] = names
    return names


def _hidden(name, value):
    if name.startswith("__") and name.endswith("__"):
        return True
    return type(value).__name__ == "module"


class Tracer:
    def __init__(self, limits, renderer):
        self.max_steps = int(limits["max_steps"])
        self.renderer = renderer
        self.events = []
        self.pending = {}
        self.unwinding = set()
        self.active = True
        self.truncated = False

    def snapshot(self, frame):
        out = []
        seen = set()
        for name, value in frame.f_locals.items():
            if _hidden(name, value):
                continue
            seen.add(name)
            out.append([name, self.renderer.render(value)])
        if frame.f_code.co_name != "<module>":
            g = frame.f_globals
            for name in _global_stores(frame.f_code):
                if name in g and name not in seen:
                    seen.add(name)
                    out.append([name, self.renderer.render(g[name])])
        return out

    def _append(self, line, kind, bindings):
        self.events.append({"line": line, "kind": kind, "bindings": bindings})
        return len(self.events) - 1

    def _check_budget(self):
        if len(self.events) >= self.max_steps:
            self.stop()

    def _finish(self, frame):
        entry = self.pending.pop(id(frame), None)
        if entry is not None:
            self.events[entry[0]]["bindings"] = self.snapshot(frame)

    def stop(self):
        if not self.active:
            return
        self.active = False
        sys.settrace(None)
        for idx, frame in list(self.pending.values()):
            self.events[idx]["bindings"] = self.snapshot(frame)
        self.pending.clear()
        self.truncated = True

    def finish_all(self):
        for idx, frame in list(self.pending.values()):
            self.events[idx]["bindings"] = self.snapshot(frame)
        self.pending.clear()

    def global_trace(self, frame, event, arg):
        if not self.active or event != "call":
            return None
        if frame.f_code.co_filename != SUBJECT:
            return None
        self._append(frame.f_lineno, "call", self.snapshot(frame))
        self._check_budget()
        return self.local_trace

    def local_trace(self, frame, event, arg):
        if not self.active:
            return None
        key = id(frame)
        if event == "line":
            self._finish(frame)
            self.unwinding.discard(key)
            self.pending[key] = (self._append(frame.f_lineno, "line", []), frame)
        elif event == "return":
            self._finish(frame)
            if key in self.unwinding:
                self.unwinding.discard(key)
            else:
                state = self.snapshot(frame)
                state.append(["__return__", self.renderer.render(arg)])
                self._append(frame.f_lineno, "return", state)
        elif event == "exception":
            self._finish(frame)
            exc_type, exc, _tb = arg
            if exc_type is WallTimeExceeded:
                return self.local_trace
            state = self.snapshot(frame)
            state.append(["__exception__", _clip(_describe(exc_type, exc), self.renderer.width)])
            self.unwinding.add(key)
            self._append(frame.f_lineno, "exception", state)
        self._check_budget()
        return self.local_trace


def _describe(exc_type, exc):
    msg = ""
    try:
        msg = str(exc)
    except BaseException:
        msg = PLACEHOLDER
    return exc_type.__name__ + (": " + msg if msg else "")


EVENT_OVERHEAD = 16


def _cut_by_size(events, cap):
    total = 0
    for i, ev in enumerate(events):
        total += EVENT_OVERHEAD
        for name, value in ev["bindings"]:
            total += len(name.encode()) + len(value.encode())
        if total > cap:
            return events[:i], True
    return events, False


class _BoundedIO(io.StringIO):
    def __init__(self, cap):
        super().__init__()
        self.cap = cap
        self.size = 0

    def write(self, s):
        room = self.cap - self.size
        if room <= 0:
            return len(s)
        chunk = s[:room]
        self.size += len(chunk)
        super().write(chunk)
        return len(s)


def _block_network():
    # socket and everything built on it fail to import.
    sys.modules["_socket"] = None
    sys.modules["socket"] = None


# The json package drags in re at startup; the C scanner and encoder do not.
class _ScanContext:
    strict = True
    object_hook = None
    object_pairs_hook = None
    parse_float = float
    parse_int = int
    parse_constant = float
    memo = {}


def _loads(text):
    value, end = _json.make_scanner(_ScanContext())(text, 0)
    if text[end:].strip():
        raise ValueError("trailing data after request")
    return value


def _dumps(value):
    encode = _json.make_encoder(None, None, _json.encode_basestring, None, ":", ",", False, False, True)
    return "".join(encode(value, 0))


def _seed_random_on_import(seed):
    # Importing random costs more than most subjects run, so it is seeded
    # the first time anything imports it rather than up front.
    real_import = builtins.__import__

    def hooked(name, globals=None, locals=None, fromlist=(), level=0):
        module = real_import(name, globals, locals, fromlist, level)
        # Only the outermost import of random itself sees it fully initialized.
        if name == "random" and level == 0 and builtins.__import__ is hooked:
            builtins.__import__ = real_import
            sys.modules["random"].seed(seed)
        return module

    builtins.__import__ = hooked


def _on_alarm(_signum, _frame):
    raise WallTimeExceeded()


def main():
    request = _loads(sys.stdin.read())
    out_fd = int(request.get("result_fd", 3))
    limits = request["limits"]
    renderer = Renderer(limits)
    response = {
        "status": "completed",
        "detail": "",
        "stdout": "",
        "stderr": "",
        "result": None,
        "truncated": False,
        "wall_time": 0.0,
        "events": [],
    }
    mode = request.get("mode", "invoke")
    source = request.get("source", "")
    cap = int(request.get("max_output_bytes", 1 << 20))
    stdout, stderr = _BoundedIO(cap), _BoundedIO(cap)
    stdin_text = request.get("stdin", "")

    _block_network()
    _seed_random_on_import(int(request.get("seed", 0)))

    code = None
    try:
        code = compile(source, SUBJECT, "exec", dont_inherit=True)
    except (SyntaxError, ValueError) as e:
        response["status"] = "syntax_error"
        response["detail"] = _describe(type(e), e)

    tracer = Tracer(limits, renderer) if request.get("trace", True) else None
    if code is not None:
        namespace = {"__name__": "__main__", "__builtins__": builtins}
        saved = sys.stdout, sys.stderr, sys.stdin
        sys.stdout, sys.stderr, sys.stdin = stdout, stderr, io.StringIO(stdin_text)
        _signal.signal(_signal.SIGALRM, _on_alarm)
        _signal.setitimer(_signal.ITIMER_REAL, float(limits["max_wall_time"]))
        start = time.perf_counter()
        try:
            if mode == "script":
                if tracer is not None:
                    sys.settrace(tracer.global_trace)
                try:
                    exec(code, namespace)
                finally:
                    sys.settrace(None)
            else:
                exec(code, namespace)
                expr = compile(request.get("invocation", ""), "<invocation>", "eval")
                if tracer is not None:
                    sys.settrace(tracer.global_trace)
                try:
                    value = eval(expr, namespace)
                finally:
                    sys.settrace(None)
                if mode == "render":
                    response["result"] = renderer.render(value)
                else:
                    try:
                        response["result"] = repr(value)
                    except BaseException:
                        response["result"] = PLACEHOLDER
        except WallTimeExceeded:
            response["status"] = "timed_out"
        except SystemExit as e:
            if e.code not in (None, 0):
                response["status"] = "raised"
                response["detail"] = "SystemExit: " + str(e.code)
        except BaseException as e:
            response["status"] = "raised"
            response["detail"] = _describe(type(e), e)
        finally:
            sys.settrace(None)
            _signal.setitimer(_signal.ITIMER_REAL, 0)
            response["wall_time"] = time.perf_counter() - start
            sys.stdout, sys.stderr, sys.stdin = saved

    if tracer is not None:
        tracer.finish_all()
        events, cut = _cut_by_size(tracer.events, int(limits["max_render_bytes"]))
        response["events"] = events
        response["truncated"] = tracer.truncated or cut
    response["stdout"] = stdout.getvalue()
    response["stderr"] = stderr.getvalue()

    with open(out_fd, "w", encoding="utf-8", errors="backslashreplace") as out:
        out.write(_dumps(response))
        out.write("\n")


if __name__ == "__main__":
    main()
