"""Batch driver for protocol runs, tomography, fidelity, deviation and parameter sweeps.

Config files are flat ``key = value`` text with ``#`` comments; ``--set``
flags override file values. Angles are given in degrees.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional

import numpy as np

from . import __version__
from .channels import NoiseParams, dephased_rotation, unitary_channel
from .optics import rz
from .protocol import RunConfig, ideal_output, probe_outputs, run
from .qmath import bloch_vector, fidelity
from .tomography import (
    BASIS_LABELS,
    avg_fidelity,
    max_angle_deviation,
    process_tomography,
    render_chi_table,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

COMMANDS = ("simulate", "tomography", "fidelity", "deviation", "sweep")
SWEEPABLE = ("varphi", "p", "eta", "theta", "phi")

DEFAULTS = {
    "theta": "22.5",
    "phi": "0",
    "varphi": "120",
    "p": "0.85",
    "eta": "0.92",
    "mode": "enumerate",
    "seed": "",
    "noise_placement": "both_as_paper",
    "discard_d_branch": "false",
    "shots": "0",
    "fidelity_method": "quadrature",
    "samples": "100000",
    "sweep_param": "",
    "sweep_start": "",
    "sweep_stop": "",
    "sweep_steps": "",
}

FORMATS = {
    "simulate": ("json", "text"),
    "tomography": ("json", "text"),
    "fidelity": ("json", "text"),
    "deviation": ("json", "text"),
    "sweep": ("csv", "json", "text"),
}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict:
    settings = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        settings[key] = value
    return settings


def merge_settings(file_settings: dict, overrides: list[str], seed: Optional[int]) -> dict:
    settings = dict(DEFAULTS)
    for source in (file_settings, _parse_overrides(overrides)):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown setting {key!r}")
            settings[key] = value
    if seed is not None:
        settings["seed"] = str(seed)
    return settings


def _parse_overrides(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        out[key] = value
    return out


def _float(settings: dict, key: str) -> float:
    try:
        return float(settings[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {settings[key]!r}") from None


def _bool(settings: dict, key: str) -> bool:
    value = settings[key].lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {settings[key]!r}")


def _int(settings: dict, key: str) -> int:
    try:
        return int(settings[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {settings[key]!r}") from None


def build_run_config(settings: dict) -> RunConfig:
    seed = _int(settings, "seed") if settings["seed"] else None
    try:
        return RunConfig(
            theta=np.radians(_float(settings, "theta")),
            phi=np.radians(_float(settings, "phi")),
            varphi=np.radians(_float(settings, "varphi")),
            noise=NoiseParams(_float(settings, "p"), _float(settings, "eta")),
            mode=settings["mode"],
            seed=seed,
            noise_placement=settings["noise_placement"],
            discard_d_branch=_bool(settings, "discard_d_branch"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def sweep_axis(settings: dict) -> tuple[str, np.ndarray]:
    name = settings["sweep_param"]
    if name not in SWEEPABLE:
        raise ConfigError(f"sweep_param must be one of {SWEEPABLE}, got {name!r}")
    for key in ("sweep_start", "sweep_stop", "sweep_steps"):
        if not settings[key]:
            raise ConfigError(f"sweep requires {key}")
    steps = _int(settings, "sweep_steps")
    if steps < 2:
        raise ConfigError("sweep_steps must be at least 2")
    return name, np.linspace(_float(settings, "sweep_start"), _float(settings, "sweep_stop"), steps)


def _num(x: float) -> str:
    return format(float(x), ".12g")


def _channels(cfg: RunConfig):
    return unitary_channel(rz(cfg.varphi)), dephased_rotation(cfg.varphi, cfg.noise)


def cmd_simulate(settings: dict, fmt: str) -> tuple[str, list[str]]:
    cfg = build_run_config(settings)
    transcript = run(cfg)
    ideal = ideal_output(cfg.theta, cfg.phi, cfg.varphi)
    b = bloch_vector(transcript.final_state)
    f = fidelity(transcript.final_state, ideal.dm())
    summary = [
        f"final Bloch vector: ({_num(b.x)}, {_num(b.y)}, {_num(b.z)})",
        f"fidelity to rz(varphi)|psi>: {_num(f)}",
    ]
    if fmt == "json":
        return transcript.to_json() + "\n", summary
    lines = [
        f"{s.actor:<12}{s.action:<34}{'' if s.outcome is None else s.outcome!s:<4}{_num(s.branch_probability)}"
        for s in transcript.steps
    ]
    return "\n".join(lines + summary) + "\n", summary


def cmd_tomography(settings: dict, fmt: str) -> tuple[str, list[str]]:
    cfg = build_run_config(settings)
    shots = _int(settings, "shots")
    ideal, dephased = _channels(cfg)
    chis = {
        "ideal": process_tomography(ideal),
        "dephased": process_tomography(dephased),
    }
    outputs = probe_outputs(cfg)
    if shots > 0:
        est = process_tomography(outputs, shots=shots, seed=cfg.seed)
        chis["protocol_raw"] = est.raw
        chis["protocol"] = est.projected
    else:
        chis["protocol"] = process_tomography(outputs)
    diff = float(np.max(np.abs(chis["dephased"].entries - chis["protocol"].entries)))
    summary = [f"max |chi_dephased - chi_protocol| = {_num(diff)}"]
    if fmt == "json":
        doc = {
            "basis": list(BASIS_LABELS),
            "varphi_deg": _float(settings, "varphi"),
            "p": cfg.noise.p,
            "eta": cfg.noise.eta,
            "shots": shots,
            "chi": {name: chi.to_dict() for name, chi in chis.items()},
        }
        return json.dumps(doc, indent=2) + "\n", summary
    tables = [render_chi_table(chi, f"chi_{name}") for name, chi in chis.items()]
    return "\n\n".join(tables) + "\n\n" + "\n".join(summary) + "\n", summary


def cmd_fidelity(settings: dict, fmt: str) -> tuple[str, list[str]]:
    cfg = build_run_config(settings)
    method = settings["fidelity_method"]
    samples = _int(settings, "samples")
    seed = cfg.seed if cfg.seed is not None else 0
    ideal, dephased = _channels(cfg)
    protocol_ch = process_tomography(probe_outputs(cfg)).to_kraus()
    try:
        values = {
            "ideal_vs_dephased": avg_fidelity(ideal, dephased, method=method, samples=samples, seed=seed),
            "ideal_vs_protocol": avg_fidelity(ideal, protocol_ch, method=method, samples=samples, seed=seed),
            "dephased_vs_protocol": avg_fidelity(dephased, protocol_ch, method=method, samples=samples, seed=seed),
        }
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    summary = [f"avg fidelity {k}: {_num(v)}" for k, v in values.items()]
    if fmt == "json":
        return json.dumps({"method": method, "avg_fidelity": values}, indent=2) + "\n", summary
    return "\n".join(summary) + "\n", summary


def cmd_deviation(settings: dict, fmt: str) -> tuple[str, list[str]]:
    cfg = build_run_config(settings)
    ideal, dephased = _channels(cfg)
    report = max_angle_deviation(dephased, ideal)
    theta, phi = report.argmax_input
    doc = {
        "delta_max_deg": report.delta_max,
        "argmax_theta_deg": float(np.degrees(theta)),
        "argmax_phi_deg": float(np.degrees(phi)),
    }
    summary = [f"delta_max = {_num(report.delta_max)} deg at theta = {_num(doc['argmax_theta_deg'])} deg"]
    if fmt == "json":
        return json.dumps(doc, indent=2) + "\n", summary
    return "\n".join(summary) + "\n", summary


def sweep_rows(settings: dict) -> tuple[str, list[tuple[float, float, float]]]:
    name, values = sweep_axis(settings)
    rows = []
    for value in values:
        point = dict(settings, **{name: repr(float(value))})
        cfg = build_run_config(point)
        ideal, dephased = _channels(cfg)
        rows.append((float(value), avg_fidelity(ideal, dephased), max_angle_deviation(dephased, ideal).delta_max))
    return name, rows


def cmd_sweep(settings: dict, fmt: str) -> tuple[str, list[str]]:
    name, rows = sweep_rows(settings)
    summary = [f"{len(rows)} sweep points over {name}"]
    if fmt == "json":
        doc = [{name: v, "avg_fidelity_vs_ideal": f, "delta_max_deg": d} for v, f, d in rows]
        return json.dumps(doc, indent=2) + "\n", summary
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", delimiter="," if fmt == "csv" else "\t")
    writer.writerow([name, "avg_fidelity_vs_ideal", "delta_max_deg"])
    for row in rows:
        writer.writerow([_num(x) for x in row])
    return buf.getvalue(), summary


HANDLERS = {
    "simulate": cmd_simulate,
    "tomography": cmd_tomography,
    "fidelity": cmd_fidelity,
    "deviation": cmd_deviation,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remote-rotation",
        description="Simulate and verify the entanglement-assisted remote z-rotation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value settings file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", dest="fmt", help="json, csv or text")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed for sample mode")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    fmt = args.fmt or FORMATS[args.command][0]
    try:
        if fmt not in FORMATS[args.command]:
            raise ConfigError(f"{args.command} supports formats {FORMATS[args.command]}, not {fmt!r}")
        file_settings = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    file_settings = parse_config_text(fh.read())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        settings = merge_settings(file_settings, args.overrides, args.seed)
        artifact, summary = HANDLERS[args.command](settings, fmt)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(artifact)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_IO
        print("\n".join(summary))
    else:
        sys.stdout.write(artifact)
        if fmt != "text":
            print("\n".join(summary), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
