"""Command-line entry points: single runs, parameter sweeps and the RSA timing bench.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
Log verbosity comes from ``SLEEPGUARD_LOG_LEVEL`` (default WARNING).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .core import ConfigError, NetworkConfig, load_config
from .engine import run_simulation, write_event_log
from .security import rsa_decrypt, rsa_encrypt, rsa_keygen

log = logging.getLogger("sleepguard")

RUN_COLUMNS = ["ratio", "seed", "scheme", "throughput_kbps", "pdr", "dr", "residual_pct", "lifetime_s", "rounds"]
METRICS = RUN_COLUMNS[3:]
BENCH_COLUMNS = ["key_bits", "chunk_bytes", "blocks", "encrypt_s", "decrypt_s", "encrypt_j", "decrypt_j"]

AXES = {
    "MisbehavingRatio": "attack_ratio",
    "NodeCount": "node_count",
    "SimTime": "sim_time",
    "AttackInterval": "attack_interval",
}
SCHEME_ALIASES = {
    "defended": "defended",
    "undefended": "undefended",
    "undefendedbaseline": "undefended",
    "baseline": "undefended",
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.6g}"


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    seeds: tuple
    schemes: tuple = ("defended", "undefended")

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise UsageError(f"unknown axis {self.axis!r}; choose from {', '.join(AXES)}")
        if not self.values:
            raise UsageError("sweep needs at least one value")
        if not self.seeds:
            raise UsageError("sweep needs at least one seed")
        if not self.schemes:
            raise UsageError("sweep needs at least one scheme")

    @property
    def key(self) -> str:
        return AXES[self.axis]


def parse_schemes(text: str) -> tuple:
    out = []
    for part in _split(text):
        canon = SCHEME_ALIASES.get(part.lower())
        if canon is None:
            raise UsageError(f"unknown scheme {part!r}")
        if canon not in out:
            out.append(canon)
    return tuple(out)


def _split(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _axis_value(key: str, raw: str):
    kind = {f.name: f.type for f in fields(NetworkConfig)}[key]
    try:
        v = float(raw)
    except ValueError:
        raise UsageError(f"bad value {raw!r} for {key}") from None
    if kind == "int":
        if v != int(v):
            raise UsageError(f"{key} needs integer values, got {raw!r}")
        return int(v)
    return v


def _load(path: str | None, sets: dict | None = None) -> NetworkConfig:
    text = ""
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    extra = "".join(f"{k}={v}\n" for k, v in (sets or {}).items())
    return load_config(text + "\n" + extra)


def _parse_sets(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def run_row(cfg: NetworkConfig) -> list:
    rep = run_simulation(cfg, record_events=False).report
    return [cfg.attack_ratio, cfg.seed, cfg.scheme, rep.throughput_kbps, rep.pdr_percent,
            rep.detection_rate_percent, rep.residual_energy_percent, rep.network_lifetime_s,
            rep.rounds_completed]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([r if isinstance(r, str) else fmt(r) for r in row])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# ------------------------------------------------------------- commands

def cmd_simulate(config_path: str | None, seed: int | None, out: str, event_log: str | None = None,
                 sets: dict | None = None) -> int:
    cfg = _load(config_path, sets)
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    log.info("simulate seed=%s scheme=%s ratio=%s", cfg.seed, cfg.scheme, cfg.attack_ratio)
    result = run_simulation(cfg, record_events=event_log is not None)
    rep = result.report
    row = [cfg.attack_ratio, cfg.seed, cfg.scheme, rep.throughput_kbps, rep.pdr_percent,
           rep.detection_rate_percent, rep.residual_energy_percent, rep.network_lifetime_s,
           rep.rounds_completed]
    _write(out, _csv_text(RUN_COLUMNS, [row]))
    if event_log:
        Path(event_log).parent.mkdir(parents=True, exist_ok=True)
        with open(event_log, "w") as fh:
            write_event_log(result.events, fh)
    return 0


def sweep_configs(base: NetworkConfig, spec: SweepSpec) -> list[tuple]:
    """Every (value, config) of the sweep in (value, seed, scheme) order."""
    out = []
    for v in spec.values:
        for s in spec.seeds:
            for scheme in spec.schemes:
                out.append((v, base.replace(**{spec.key: v, "seed": s, "scheme": scheme})))
    return out


def summarize(run_rows: list[list[str]], spec: SweepSpec) -> tuple[list[str], list[list[str]]]:
    """Seed means of the serialized per-run values, one row per axis value."""
    header = ["value"] + [f"{m}_{s}" for m in METRICS for s in spec.schemes]
    idx = {c: i for i, c in enumerate(["value"] + RUN_COLUMNS)}
    rows = []
    for v in spec.values:
        vtext = fmt(v)
        row = [vtext]
        for m in METRICS:
            for s in spec.schemes:
                vals = [float(r[idx[m]]) for r in run_rows if r[0] == vtext and r[idx["scheme"]] == s]
                row.append(fmt(statistics.fmean(vals)))
        rows.append(row)
    return header, rows


def plot_summary(summary_csv: str, out_dir: str) -> list[str]:
    """One SVG per metric, axis value on x, one line per scheme. Pure function of the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "sleepguard"
    with open(summary_csv, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    xs = [float(r[0]) for r in body]
    written = []
    for m in METRICS:
        cols = [(i, h[len(m) + 1:]) for i, h in enumerate(header) if h.startswith(m + "_")]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for i, scheme in cols:
            ax.plot(xs, [float(r[i]) for r in body], marker="o", label=scheme)
        ax.set_xlabel("value")
        ax.set_ylabel(m)
        ax.legend()
        fig.tight_layout()
        path = str(Path(out_dir) / f"{m}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


def cmd_sweep(config_path: str | None, spec: SweepSpec, out_dir: str, jobs: int = 1) -> int:
    base = _load(config_path)
    jobs_list = sweep_configs(base, spec)
    log.info("sweep %s: %d runs", spec.axis, len(jobs_list))
    cfgs = [c for _, c in jobs_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_row, cfgs))
    else:
        results = [run_row(c) for c in cfgs]
    run_rows = []
    for (v, _), row in zip(jobs_list, results):
        run_rows.append([fmt(v)] + [r if isinstance(r, str) else fmt(r) for r in row])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(str(out / "runs.csv"), _csv_text(["value"] + RUN_COLUMNS, run_rows))
    header, rows = summarize(run_rows, spec)
    _write(str(out / "summary.csv"), _csv_text(header, rows))
    plot_summary(str(out / "summary.csv"), str(out))
    return 0


def crypto_bench(key_sizes, chunk_sizes, trials: int = 5, seed: int = 1,
                 power_w: float = NetworkConfig.tx_power) -> list[list]:
    """Median chunk encrypt/decrypt times per (key size, chunk size).

    Every key encrypts the same number of fixed-size plaintext blocks (the
    largest block the smallest modulus can hold), so only the key size
    varies along a row of the sweep.
    """
    if not key_sizes or not chunk_sizes:
        raise UsageError("need at least one key size and one chunk size")
    if min(key_sizes) < 64:
        raise UsageError("key sizes must be >= 64 bits")
    rng = np.random.default_rng(seed)
    block = (min(key_sizes) - 1) // 8
    rows = []
    for bits in key_sizes:
        keys = rsa_keygen(bits // 2, rng)
        for chunk in chunk_sizes:
            payload = rng.bytes(chunk)
            blocks = [int.from_bytes(payload[i:i + block], "big") for i in range(0, chunk, block)]
            enc, dec = [], []
            for _ in range(trials):
                t = time.perf_counter()
                cts = [rsa_encrypt(b, keys.public) for b in blocks]
                enc.append(time.perf_counter() - t)
                t = time.perf_counter()
                back = [rsa_decrypt(c, keys.private) for c in cts]
                dec.append(time.perf_counter() - t)
                if back != blocks:
                    raise RuntimeError(f"roundtrip failed for {bits}-bit key")
            te, td = statistics.median(enc), statistics.median(dec)
            rows.append([bits, chunk, len(blocks), te, td, te * power_w, td * power_w])
    return rows


def cmd_crypto_bench(key_sizes, chunk_sizes, out: str, trials: int = 5, seed: int = 1) -> int:
    rows = crypto_bench(key_sizes, chunk_sizes, trials, seed)
    _write(out, _csv_text(BENCH_COLUMNS, rows))
    return 0


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> list[int]:
    try:
        return [int(p) for p in _split(text)]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sleepguard", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one simulation and write a one-row CSV")
    s.add_argument("--config", help="key=value config file (defaults when omitted)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    s.add_argument("--event-log", help="write the NDJSON event log here")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    w = sub.add_parser("sweep", help="sweep one axis over seeds and schemes")
    w.add_argument("--config")
    w.add_argument("--axis", required=True, choices=sorted(AXES))
    w.add_argument("--values", required=True)
    w.add_argument("--seeds", required=True)
    w.add_argument("--schemes", default="defended,undefended")
    w.add_argument("--out", required=True, help="output directory")
    w.add_argument("--jobs", type=int, default=1)

    c = sub.add_parser("crypto-bench", help="RSA chunk encrypt/decrypt timing")
    c.add_argument("--key-sizes", default="128,256,512,768,1024,1280")
    c.add_argument("--chunk-sizes", default="256,512,1024")
    c.add_argument("--out", default="-")
    c.add_argument("--trials", type=int, default=5)
    c.add_argument("--seed", type=int, default=1)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SLEEPGUARD_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.seed, args.out, args.event_log, _parse_sets(args.set))
        if args.command == "sweep":
            key = AXES[args.axis]
            spec = SweepSpec(axis=args.axis,
                             values=tuple(_axis_value(key, v) for v in _split(args.values)),
                             seeds=tuple(_ints(args.seeds)),
                             schemes=parse_schemes(args.schemes))
            return cmd_sweep(args.config, spec, args.out, args.jobs)
        return cmd_crypto_bench(_ints(args.key_sizes), _ints(args.chunk_sizes), args.out,
                                args.trials, args.seed)
    except (ConfigError, UsageError) as exc:
        print(f"sleepguard: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 2
        log.debug("runtime failure", exc_info=True)
        print(f"sleepguard: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
