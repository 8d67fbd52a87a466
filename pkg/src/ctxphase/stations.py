"""Separated-stations harness.

A source process draws a context class per pair and sends a descriptor to
two station processes. Each station picks its own setting, computes its
outcome from its local ket alone and reports to the collector (the calling
process). The only byte-stream routes are source->A, source->B, A->collector
and B->collector; there is no route between the stations.

Run ``python -m ctxphase.stations <role> ...`` to start a single role; this
is how the harness spawns its children.
"""

from __future__ import annotations

import argparse
import json
import os
import selectors
import socket
import subprocess
import sys
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .contextual import ContextClass, local_states
from .hilbert import BellKind, DomainError, Frame
from .measurement import OutcomeRecord, Setting, eigenvalue, estimate_from_products
from .streams import STATION_STREAMS, BitStream, class_draws

MAX_LINE = 512
STATIONS = ("A", "B")
REQUIRED = {
    "pair": ("pair_id", "kind", "klass"),
    "report": ("pair_id", "station", "setting", "outcome"),
    "end": (),
}


class ProtocolError(ValueError):
    pass


class IntegrityError(RuntimeError):
    pass


class TransportError(RuntimeError):
    pass


# -- wire format ---------------------------------------------------------------


def encode(message: dict) -> bytes:
    line = json.dumps(message, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    if len(line) > MAX_LINE:
        raise ProtocolError(f"message of {len(line)} bytes exceeds {MAX_LINE}")
    return line


def _token(enum, value, name):
    try:
        return enum[value]
    except (KeyError, TypeError):
        raise ProtocolError(f"bad {name} token {value!r}") from None


def decode(line: bytes) -> dict:
    """Parse and validate one line. Unknown fields are dropped."""
    if len(line) > MAX_LINE:
        raise ProtocolError(f"line of {len(line)} bytes exceeds {MAX_LINE}")
    try:
        raw = json.loads(line)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"malformed line: {exc}") from None
    if not isinstance(raw, dict):
        raise ProtocolError("message is not an object")
    if "type" not in raw:
        raise ProtocolError("missing field 'type'")
    kind = raw["type"]
    if kind not in REQUIRED:
        raise ProtocolError(f"unknown message type {kind!r}")
    msg = {"type": kind}
    for name in REQUIRED[kind]:
        if name not in raw:
            raise ProtocolError(f"missing field {name!r}")
    for name, value in raw.items():
        if name == "pair_id":
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ProtocolError(f"bad pair_id {value!r}")
            msg[name] = value
        elif name == "kind":
            msg[name] = _token(BellKind, value, name)
        elif name in ("klass", "klass_x"):
            msg[name] = _token(ContextClass, value, name)
        elif name == "setting":
            frame = _token(Frame, value, name)
            if frame is Frame.Y:
                raise ProtocolError("station settings are Z or X")
            msg[name] = frame
        elif name == "station":
            if value not in STATIONS:
                raise ProtocolError(f"bad station {value!r}")
            msg[name] = value
        elif name == "outcome":
            if value not in (1, -1) or isinstance(value, bool):
                raise ProtocolError(f"bad outcome {value!r}")
            msg[name] = value
        elif name == "count" and isinstance(value, int):
            msg[name] = value
    return msg


# -- setting policies --------------------------------------------------------------


class SettingPolicy:
    """Per-station frame schedule: ``z``, ``x``, ``random`` or a cycle like ``zzx``."""

    def __init__(self, spec: str):
        spec = spec.strip().lower()
        if spec != "random" and (not spec or set(spec) - {"z", "x"}):
            raise DomainError(f"policy must be 'random' or a string over z/x, got {spec!r}")
        self.spec = spec
        self._bits: Optional[BitStream] = None

    def bind(self, seed: int, station: str) -> "SettingPolicy":
        if self.spec == "random":
            self._bits = BitStream(seed, STATION_STREAMS[station])
        return self

    def frame(self, pair_id: int) -> Frame:
        if self.spec == "random":
            return (Frame.Z, Frame.X)[self._bits[pair_id]]
        return Frame(self.spec[pair_id % len(self.spec)].upper())

    def __str__(self):
        return self.spec


@lru_cache(maxsize=None)
def local_outcome(kind: BellKind, klass: ContextClass, frame: Frame, station: str) -> int:
    """Eigenvalue of this station's collapsed ket under its own frame."""
    return eigenvalue(local_states(kind, klass, frame).side(station), frame)


# -- child roles --------------------------------------------------------------------

_CLASSES = (ContextClass.CLASS1, ContextClass.CLASS2)


def context_class(msg: dict, frame: Frame) -> ContextClass:
    """The pair's class in the measurement context of ``frame``.

    ``klass`` belongs to the Z context; ``klass_x``, when present, to the X
    context. A descriptor without ``klass_x`` uses ``klass`` for both.
    """
    if frame is Frame.X:
        return msg.get("klass_x", msg["klass"])
    return msg["klass"]


def _role_source(args):
    outs = [socket.socket(fileno=fd).makefile("wb") for fd in args.out]
    kind = BellKind[args.kind]
    chunk = 4096
    for start in range(0, args.n, chunk):
        count = min(chunk, args.n - start)
        z_bits = class_draws(args.seed, count, start, "Z").tolist()
        x_bits = class_draws(args.seed, count, start, "X").tolist()
        for offset in range(count):
            line = encode(
                {
                    "type": "pair",
                    "pair_id": start + offset,
                    "kind": kind.name,
                    "klass": _CLASSES[z_bits[offset]].name,
                    "klass_x": _CLASSES[x_bits[offset]].name,
                }
            )
            for out in outs:
                out.write(line)
    for out in outs:
        out.write(encode({"type": "end", "count": args.n}))
        out.close()


def _role_station(args):
    name = args.name
    policy = SettingPolicy(args.policy).bind(args.seed, name)
    inp = socket.socket(fileno=args.inp).makefile("rb")
    out = socket.socket(fileno=args.out).makefile("wb")
    sent = 0
    while True:
        line = inp.readline(MAX_LINE + 1)
        if not line:
            break
        msg = decode(line)
        if msg["type"] == "end":
            break
        if msg["type"] != "pair":
            continue
        frame = policy.frame(msg["pair_id"])
        klass = context_class(msg, frame)
        report = {
            "type": "report",
            "pair_id": msg["pair_id"],
            "station": name,
            "setting": frame.name,
            "outcome": local_outcome(msg["kind"], klass, frame, name),
            "kind": msg["kind"].name,
            "klass": klass.name,
        }
        out.write(encode(report))
        sent += 1
    out.write(encode({"type": "end", "count": sent}))
    out.close()


def main(argv=None):
    parser = argparse.ArgumentParser(prog="python -m ctxphase.stations")
    sub = parser.add_subparsers(dest="role", required=True)
    src = sub.add_parser("source")
    src.add_argument("--kind", required=True)
    src.add_argument("--n", type=int, required=True)
    src.add_argument("--seed", type=int, required=True)
    src.add_argument("--out", type=int, nargs=2, required=True)
    st = sub.add_parser("station")
    st.add_argument("--name", choices=STATIONS, required=True)
    st.add_argument("--policy", required=True)
    st.add_argument("--seed", type=int, required=True)
    st.add_argument("--inp", type=int, required=True)
    st.add_argument("--out", type=int, required=True)
    args = parser.parse_args(argv)
    (_role_source if args.role == "source" else _role_station)(args)


# -- collector ------------------------------------------------------------------------


@dataclass(frozen=True)
class StationReport:
    pair_id: int
    station: str
    setting: Frame
    outcome: int
    wall_clock: float
    klass: Optional[ContextClass] = None


@dataclass
class Topology:
    """Socket inodes held by each child, grouped by route."""

    routes: dict  # route name -> set of socket inodes
    holders: dict  # role -> set of route names it holds

    @property
    def station_route_exists(self) -> bool:
        a, b = self.holders.get("A", set()), self.holders.get("B", set())
        return bool(a & b) or "A->B" in self.routes

    @property
    def unexpected(self) -> dict:
        allowed = {
            "source": {"source->A", "source->B"},
            "A": {"source->A", "A->collector"},
            "B": {"source->B", "B->collector"},
        }
        return {role: held - allowed[role] for role, held in self.holders.items() if held - allowed[role]}


@dataclass
class ExperimentResult:
    kind: BellKind
    n_pairs: int
    seed: int
    policy_a: str
    policy_b: str
    records: list
    losses: list  # (pair_id, station)
    reports: dict  # station -> list of StationReport, arrival order
    streams: dict  # station -> raw bytes received
    topology: Optional[Topology]
    elapsed: float

    def estimates(self) -> dict:
        """CorrelationEstimate per (setting A, setting B) pair of frames."""
        groups: dict = {}
        for r in self.records:
            groups.setdefault((r.setting_a.frame, r.setting_b.frame), []).append(r.a * r.b)
        return {
            key: estimate_from_products(products, self.seed)
            for key, products in sorted(groups.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value))
        }


def _inodes(pid: int) -> Optional[set]:
    fd_dir = f"/proc/{pid}/fd"
    try:
        names = os.listdir(fd_dir)
    except OSError:
        return None
    found = set()
    for name in names:
        try:
            target = os.readlink(os.path.join(fd_dir, name))
        except OSError:
            continue
        if target.startswith("socket:["):
            found.add(int(target[8:-1]))
    return found


def _topology(children: dict, routes: dict) -> Optional[Topology]:
    route_inodes = {
        name: {os.fstat(s.fileno()).st_ino for s in pair} for name, pair in routes.items()
    }
    holders = {}
    for role, proc in children.items():
        held = _inodes(proc.pid)
        if held is None:
            return None
        holders[role] = {name for name, ino in route_inodes.items() if held & ino}
        stray = held - set().union(*route_inodes.values())
        if stray:
            holders[role].add(f"unknown:{sorted(stray)}")
    return Topology(route_inodes, holders)


def _spawn(args, keep):
    cmd = [sys.executable, "-m", "ctxphase.stations", *map(str, args)]
    return subprocess.Popen(cmd, pass_fds=[s.fileno() for s in keep], stdin=subprocess.DEVNULL)


def run_experiment(
    kind: BellKind,
    n_pairs: int,
    policy_a: str = "z",
    policy_b: str = "z",
    seed: int = 0,
    timeout: float = 60.0,
) -> ExperimentResult:
    if n_pairs < 1:
        raise DomainError("n_pairs must be at least 1")
    kind = BellKind(kind)
    pol = {"A": SettingPolicy(policy_a), "B": SettingPolicy(policy_b)}
    started = time.monotonic()

    routes = {
        "source->A": socket.socketpair(),
        "source->B": socket.socketpair(),
        "A->collector": socket.socketpair(),
        "B->collector": socket.socketpair(),
    }
    children = {}
    try:
        for name in STATIONS:
            inp = routes[f"source->{name}"][1]
            out = routes[f"{name}->collector"][0]
            children[name] = _spawn(
                ["station", "--name", name, "--policy", pol[name].spec, "--seed", seed,
                 "--inp", inp.fileno(), "--out", out.fileno()],
                [inp, out],
            )
        outs = [routes["source->A"][0], routes["source->B"][0]]
        children["source"] = _spawn(
            ["source", "--kind", kind.name, "--n", n_pairs, "--seed", seed,
             "--out", outs[0].fileno(), outs[1].fileno()],
            outs,
        )
        topology = _topology(children, routes)
        # the collector keeps only the reading ends of the station routes
        for name, (left, right) in routes.items():
            left.close()
            if not name.endswith("collector"):
                right.close()
        inbound = {name: routes[f"{name}->collector"][1] for name in STATIONS}
        streams, lines = _collect(inbound, started + timeout)
    finally:
        for proc in children.values():
            try:
                proc.wait(timeout=max(0.1, started + timeout - time.monotonic()))
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
        for pair in routes.values():
            for s in pair:
                s.close()

    reports, records, losses = _join(kind, n_pairs, lines)
    return ExperimentResult(
        kind=kind,
        n_pairs=n_pairs,
        seed=seed,
        policy_a=pol["A"].spec,
        policy_b=pol["B"].spec,
        records=records,
        losses=losses,
        reports=reports,
        streams=streams,
        topology=topology,
        elapsed=time.monotonic() - started,
    )


def _collect(inbound: dict, deadline: float):
    """Read both station streams to EOF; returns raw bytes and (line, t) per station."""
    sel = selectors.DefaultSelector()
    buffers = {name: bytearray() for name in inbound}
    pending = {name: b"" for name in inbound}
    lines = {name: [] for name in inbound}
    for name, sock in inbound.items():
        sel.register(sock, selectors.EVENT_READ, name)
    open_count = len(inbound)
    while open_count:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            break
        for key, _ in sel.select(timeout=remaining):
            name = key.data
            chunk = key.fileobj.recv(65536)
            if not chunk:
                sel.unregister(key.fileobj)
                open_count -= 1
                continue
            now = time.time()
            buffers[name] += chunk
            parts = (pending[name] + chunk).split(b"\n")
            pending[name] = parts.pop()
            if len(pending[name]) > MAX_LINE:
                raise ProtocolError(f"station {name} sent a line over {MAX_LINE} bytes")
            lines[name].extend((p + b"\n", now) for p in parts)
    sel.close()
    return {name: bytes(buf) for name, buf in buffers.items()}, lines


def _join(kind: BellKind, n_pairs: int, lines: dict):
    reports = {name: [] for name in STATIONS}
    by_id = {name: {} for name in STATIONS}
    for name in STATIONS:
        for raw, stamp in lines[name]:
            msg = decode(raw)
            if msg["type"] == "end":
                continue
            if msg["type"] != "report":
                raise ProtocolError(f"unexpected {msg['type']!r} message from station {name}")
            if msg["station"] != name:
                raise IntegrityError(f"report claiming station {msg['station']} on route {name}")
            pid = msg["pair_id"]
            if pid >= n_pairs:
                raise IntegrityError(f"unknown pair_id {pid} from station {name}")
            if pid in by_id[name]:
                raise IntegrityError(f"duplicate pair_id {pid} from station {name}")
            report = StationReport(pid, name, msg["setting"], msg["outcome"], stamp, msg.get("klass"))
            reports[name].append(report)
            by_id[name][pid] = report
    records, losses = [], []
    for pid in range(n_pairs):
        ra, rb = by_id["A"].get(pid), by_id["B"].get(pid)
        if ra is None or rb is None:
            losses.extend((pid, name) for name, r in (("A", ra), ("B", rb)) if r is None)
            continue
        same_context = ra.setting is rb.setting
        if same_context and None not in (ra.klass, rb.klass) and ra.klass != rb.klass:
            raise IntegrityError(f"pair {pid}: stations disagree on the class of one context")
        records.append(
            OutcomeRecord(pid, ra.klass, Setting(frame=ra.setting), Setting(frame=rb.setting), ra.outcome, rb.outcome)
        )
    return reports, records, losses


if __name__ == "__main__":
    main()
