"""Command-line harness: verification commands, inference experiments and
the accelerator report.

Every command is deterministic given its flags and seed; CSV files are the
primary output (one `# seed=...` provenance header, stable column order) and
SVG plots are convenience renderings.  Exit codes: 0 all checks pass,
1 verification failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import accel, network, pcc
from .counter import ApcTree
from .pcc import PccKind, PccSpec
from .rns import PRIMITIVE_TAPS, Lfsr, period

# Fixed default seed, printed in every report header for provenance.
DEFAULT_SEED = 0x5C2024

OUT_DIR_ENV = "SCSIM_OUT_DIR"


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUT_DIR_ENV, "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_csv(path: Path, header, rows, seed) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={seed:#x}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _plot(path: Path, draw) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# verification commands


def cmd_verify_lemma1(args) -> int:
    if args.n_max > 10:
        print(f"warning: N up to {args.n_max} (2^{2 * args.n_max} chain "
              "evaluations); this may take a while", file=sys.stderr)
    mask_xor = 1 if args.corrupt_mask else 0
    rows, failures = [], 0
    for n in range(args.n_min, args.n_max + 1):
        override = pcc.inverter_mask(n) ^ mask_xor if mask_xor else None
        for x in range(1 << n):
            enum = pcc.enumerate_chain_mean(PccKind.NAND_NOR, x, n, override)
            closed = pcc.nandnor_expected(x, n, exact=True)
            err = abs(enum - closed)
            ok = err == 0
            failures += not ok
            rows.append([n, x, float(enum), float(closed), float(err),
                         int(ok)])
    out = _out_dir(args) / "lemma1.csv"
    _write_csv(out, ["n", "x", "enumerated", "closed_form", "abs_err",
                     "pass"], rows, args.seed)
    print(f"lemma1: {len(rows)} cases, {failures} failures -> {out}")
    return 1 if failures else 0


def cmd_pcc_curves(args) -> int:
    out_dir = _out_dir(args)
    for n in args.n_list:
        rows = []
        for kind in PccKind:
            spec = PccSpec(kind, n)
            for x, v in pcc.conversion_curve(spec):
                rows.append([kind.value, n, x, v])
        out = out_dir / f"pcc_curves_n{n}.csv"
        _write_csv(out, ["kind", "n", "x", "expected"], rows, args.seed)

        def draw(ax, n=n, rows=rows):
            for kind in PccKind:
                pts = [(r[2], r[3]) for r in rows if r[0] == kind.value]
                ax.plot(*zip(*pts), label=kind.value, marker=".",
                        markersize=2, linewidth=0.8)
            ax.set_xlabel("input word X")
            ax.set_ylabel("output probability")
            ax.set_title(f"conversion curves, N={n}")
            ax.legend()

        _plot(out_dir / f"pcc_curves_n{n}.svg", draw)
        print(f"pcc-curves: N={n} -> {out}")
    return 0


def cmd_apc_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0
    for n in args.n_inputs:
        tree = ApcTree(n)
        if args.corrupt_tree:
            tree.corrupt()
        if n <= 16:
            vecs = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1)
            label = f"exhaustive 2^{n}"
        else:
            vecs = rng.integers(0, 2, size=(args.samples, n), dtype=np.uint8)
            corners = np.vstack([np.zeros(n, np.uint8), np.ones(n, np.uint8),
                                 np.eye(n, dtype=np.uint8)])
            vecs = np.vstack([vecs, corners])
            label = f"{len(vecs)} sampled"
        bad = int((tree.count(vecs.astype(np.uint8))
                   != vecs.sum(axis=1)).sum())
        failures += bad
        print(f"apc-check: n={n} ({label}): {bad} mismatches "
              f"[fa={tree.fa_count} ha={tree.ha_count}]")
    return 1 if failures else 0


def cmd_verify_lfsr(args) -> int:
    failures = 0
    for width, taps in sorted(PRIMITIVE_TAPS.items()):
        p = period(Lfsr(width, taps))
        ok = p == (1 << width) - 1
        failures += not ok
        print(f"lfsr: n={width} taps={taps} period={p} "
              f"{'ok' if ok else 'SHORT'}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# inference commands


def _bundled(name: str) -> Path:
    return Path(__file__).parent / "data" / name


def _load_dataset(args):
    if args.csv_dataset:
        return network.load_csv_dataset(args.csv_dataset)
    images = args.images or _bundled("digits_images.idx")
    labels = args.labels or _bundled("digits_labels.idx")
    return (network.load_idx_images(images),
            network.load_idx_labels(labels))


def cmd_infer(args) -> int:
    model = network.load_model(args.model)
    images, labels = _load_dataset(args)
    if args.limit:
        images, labels = images[:args.limit], labels[:args.limit]
    model = model.requantized(args.n_bits)
    spec = PccSpec(PccKind(args.pcc), args.n_bits)
    fixed = network.evaluate_fixed(model, images, labels)
    rep = network.evaluate_sc(model, images, labels, args.k, spec, args.seed)
    out = _out_dir(args) / "infer.csv"
    _write_csv(out, ["k", "n_bits", "accuracy", "n_images", "seed"],
               [[0, fixed.n_bits, fixed.accuracy, fixed.n_images, args.seed],
                [rep.k, rep.n_bits, rep.accuracy, rep.n_images, rep.seed]],
               args.seed)
    print(f"infer: fixed-point accuracy {fixed.accuracy:.4f}, "
          f"SC k={args.k} accuracy {rep.accuracy:.4f} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    model = network.load_model(args.model)
    images, labels = _load_dataset(args)
    if args.limit:
        images, labels = images[:args.limit], labels[:args.limit]
    reports = network.accuracy_sweep(model, images, labels, args.k_list,
                                     args.n_bits_list, args.seed,
                                     PccKind(args.pcc))
    rows = [[r.k, r.n_bits, r.accuracy, r.n_images, r.seed] for r in reports]
    out_dir = _out_dir(args)
    out = out_dir / "sweep.csv"
    _write_csv(out, ["k", "n_bits", "accuracy", "n_images", "seed"], rows,
               args.seed)

    def draw(ax):
        for nb in args.n_bits_list:
            pts = [(r.k, r.accuracy) for r in reports if r.n_bits == nb]
            ax.plot(*zip(*pts), marker="o", label=f"{nb}-bit")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("bitstream length k")
        ax.set_ylabel("accuracy")
        ax.legend()

    _plot(out_dir / "sweep.svg", draw)
    print(f"sweep: {len(rows)} rows -> {out}")
    return 0


# ---------------------------------------------------------------------------
# accelerator report


def cmd_arch_report(args) -> int:
    profiles = accel.load_profiles(args.profiles)
    if args.model:
        model = network.load_model(args.model)
        workloads = accel._as_workloads(model, args.n_bits)
    else:
        workloads = accel.default_workloads(args.n_bits)
    channels = list(range(args.channels_min, args.channels_max + 1))
    rows = accel.channel_sweep(workloads, channels, profiles,
                               n_bits=args.n_bits, k=args.k)
    out_dir = _out_dir(args)
    out = out_dir / "arch_report.csv"
    _write_csv(out, ["channels", "profile", "area_um2", "latency_ns",
                     "energy_pj", "adp", "edp", "edap"],
               [[r.channels, r.profile, r.area_um2, r.latency_ns,
                 r.energy_pj, r.adp, r.edp, r.edap] for r in rows],
               args.seed)
    for metric in ("adp", "edp", "edap"):
        print(f"arch-report: argmin {metric}:",
              accel.argmin_channels(rows, metric))
    names = sorted(profiles)
    if len(names) >= 2:
        a, b = profiles[names[0]], profiles[names[1]]
        print(f"arch-report: channel area gain {names[0]} -> {names[1]}: "
              f"{accel.gain(a.channel.area_um2, b.channel.area_um2):.1f}%")

    def draw(ax):
        for name in names:
            pts = [(r.channels, r.edap) for r in rows if r.profile == name]
            ax.plot(*zip(*pts), marker="o", markersize=3, label=name)
        ax.set_yscale("log")
        ax.set_xlabel("channels")
        ax.set_ylabel("EDAP (um^2 * pJ * ns)")
        ax.legend()

    _plot(out_dir / "arch_report.svg", draw)
    print(f"arch-report: {len(rows)} rows -> {out}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="scsim",
        description="stochastic-computing circuit and accelerator simulator")
    ap.add_argument("--config", help="JSON file of default flag values "
                    "(flags given on the command line win)")
    ap.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED)
    ap.add_argument("--out-dir", help=f"output directory (or ${OUT_DIR_ENV})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-lemma1",
                       help="exhaustive chain-vs-closed-form check")
    p.add_argument("--n-min", type=int, default=3)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--corrupt-mask", action="store_true",
                   help="negative control: flip one inverter")
    p.set_defaults(func=cmd_verify_lemma1)

    p = sub.add_parser("pcc-curves", help="analytic conversion curves")
    p.add_argument("--n-list", type=_int_list, default=[4, 8])
    p.set_defaults(func=cmd_pcc_curves)

    p = sub.add_parser("apc-check", help="counter-vs-popcount check")
    p.add_argument("--n-inputs", type=int, nargs="+", default=[15, 25])
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--corrupt-tree", action="store_true",
                   help="negative control: swap one adder's outputs")
    p.set_defaults(func=cmd_apc_check)

    p = sub.add_parser("verify-lfsr", help="maximal-period check")
    p.set_defaults(func=cmd_verify_lfsr)

    for name, fn in (("infer", cmd_infer), ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        p.add_argument("--model", default=str(_bundled("toy_model.json")),
                       help="quantized model JSON (default: bundled toy net)")
        p.add_argument("--images")
        p.add_argument("--labels")
        p.add_argument("--csv-dataset")
        p.add_argument("--limit", type=int, default=0)
        p.add_argument("--pcc", choices=[k.value for k in PccKind],
                       default=PccKind.NAND_NOR.value)
        if name == "infer":
            p.add_argument("--k", type=int, default=128)
            p.add_argument("--n-bits", type=int, default=8)
        else:
            p.add_argument("--k-list", type=_int_list,
                           default=[8, 16, 32, 64, 128])
            p.add_argument("--n-bits-list", type=_int_list, default=[8])
        p.set_defaults(func=fn)

    p = sub.add_parser("arch-report", help="channel sweep and cost rollup")
    p.add_argument("--model")
    p.add_argument("--profiles", help="profile JSON (default: bundled)")
    p.add_argument("--channels-min", type=int, default=1)
    p.add_argument("--channels-max", type=int, default=32)
    p.add_argument("--n-bits", type=int, default=8)
    p.add_argument("--k", type=int, default=32)
    p.set_defaults(func=cmd_arch_report)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv) -> list:
    """Pull --config out of argv and fold its values in as defaults."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        with open(known.config) as fh:
            values = json.load(fh)
        defaults = {k.replace("-", "_"): v for k, v in values.items()}
        ap.set_defaults(**defaults)
        # subcommand flags live on the subparsers, which hold their own
        # defaults; push the config values down to each of them too
        for action in ap._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub in action.choices.values():
                    sub.set_defaults(**{k: v for k, v in defaults.items()
                                        if any(a.dest == k
                                               for a in sub._actions)})
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        _apply_config(ap, argv)
        args = ap.parse_args(argv)
        return args.func(args)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
