"""Experiment runner: flat config files, end-to-end pipelines, artifacts.

Verbs (exit code 0 on success, 2 on configuration errors, 3 on compute
failures):

* ``fbx solve <config>``    -- minimize, extract, analyze, emit artifacts
* ``fbx analyze <config> <field-file>`` -- analyses on a saved solution
* ``fbx sweep <config> --param p=0.3,0.5,0.7`` -- one run per value
* ``fbx report <manifest>`` -- re-hash the files listed in a manifest

Configs are flat INI-style text with sections [domain], [energy],
[schedule], [analysis], [output]; unknown keys are rejected with the
offending name, malformed lines with their line number.

Every run writes a ``manifest.json`` naming each emitted file with its
64-bit FNV-1a content hash.  Manifests are byte-deterministic for a given
config (timings go to an unlisted ``timings.json`` sidecar), so re-running
under a different FBX_THREADS worker count yields hash-identical manifests.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    blowup_sequence,
    campanato_rate,
    growth_fit,
    halfplane_constant,
    halfplane_profile,
    nondeg_check,
    subharmonic_witness,
    weiss_series,
)
from .domain import DomainSpec, Grid, build_grid
from .energy import EnergyParams, ScalarField, save_field, load_field
from .freeboundary import (
    ConeSpec,
    FreeBoundary,
    boundary_to_json,
    cone_check,
    extract_free_boundary,
    tangency_profile,
)
from .minimize import BoundaryData, Schedule, default_schedule, minimize


class ConfigError(ValueError):
    """Configuration file error (parse, unknown key, or range violation)."""


class EmptyDataError(ValueError):
    """Nothing to draw."""


_SECTION_KEYS = {
    "domain": {
        "R", "h", "shape", "width", "height", "preset", "M", "gap", "table",
    },
    "energy": {"lambda_plus", "lambda_minus", "p"},
    "schedule": {
        "eps_start", "eps_factor", "eps_min", "inner_tol",
        "max_inner_iters", "seeds",
    },
    "analysis": {
        "tau", "r_nbhd", "grad_tol", "weiss_factor",
        "weiss_center", "weiss_radii", "weiss_slack_rel",
        "growth_center", "growth_radii",
        "nondeg_center", "nondeg_radii",
        "campanato_center", "campanato_radii",
        "cone_delta", "cone_rho", "bands",
        "blowup_center", "blowup_scales", "blowup_h",
        "witness_y",
    },
    "output": {"dir"},
}

_PRESETS = ("zero", "halfplane_trace", "two_phase", "custom")


@dataclass(frozen=True)
class RunConfig:
    spec: DomainSpec
    params: EnergyParams
    preset: str = "zero"
    M: float = 1.0
    gap: float = 0.2
    table: str | None = None
    schedule_overrides: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    outdir: str = "out"
    weiss_factor: int = 1

    def echo(self) -> dict:
        d = {
            "domain": {
                "R": self.spec.radius,
                "h": self.spec.h,
                "shape": self.spec.shape,
                "preset": self.preset,
                "M": self.M,
                "gap": self.gap,
            },
            "energy": {
                "lambda_plus": self.params.lambda_plus,
                "lambda_minus": self.params.lambda_minus,
                "p": self.params.p,
                "beta": self.params.beta,
            },
            "schedule": dict(sorted(self.schedule_overrides.items())),
            "analysis": {
                k: list(v) if isinstance(v, (list, tuple)) else v
                for k, v in sorted(self.analysis.items())
            },
            "weiss_factor": self.weiss_factor,
        }
        if self.spec.shape == "rectangle":
            d["domain"]["width"] = self.spec.width
            d["domain"]["height"] = self.spec.height
        if self.table:
            d["domain"]["table"] = self.table
        return d


def _parse_scalar(key, raw, lineno):
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: key {key}: not a number: {raw!r}") from exc


def _parse_list(key, raw, lineno):
    try:
        return [float(x) for x in raw.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: key {key}: bad list: {raw!r}") from exc


def parse_config(text: str) -> RunConfig:
    """Strict parse of the flat key=value config format."""
    section = None
    raw: dict[str, dict[str, tuple[str, int]]] = {k: {} for k in _SECTION_KEYS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if name not in _SECTION_KEYS:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            section = name
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, val = (part.strip() for part in stripped.split("=", 1))
        if key not in _SECTION_KEYS[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        if key in raw[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[section][key] = (val, lineno)

    dom = raw["domain"]
    shape = dom.get("shape", ("half_disk", 0))[0]

    def scalar(section, key, default):
        if key in raw[section]:
            return _parse_scalar(key, *raw[section][key])
        return default

    try:
        spec = DomainSpec(
            h=scalar("domain", "h", 0.015625),
            radius=scalar("domain", "R", 1.0),
            shape=shape,
            width=scalar("domain", "width", 0.0),
            height=scalar("domain", "height", 0.0),
        )
        params = EnergyParams(
            lambda_plus=scalar("energy", "lambda_plus", 1.0),
            lambda_minus=scalar("energy", "lambda_minus", 1.0),
            p=scalar("energy", "p", 0.5),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    preset = dom.get("preset", ("zero", 0))[0]
    if preset not in _PRESETS:
        raise ConfigError(f"unknown boundary preset {preset!r}")

    sched: dict = {}
    for key in ("eps_start", "eps_factor", "eps_min", "inner_tol"):
        if key in raw["schedule"]:
            sched[key] = _parse_scalar(key, *raw["schedule"][key])
    if "max_inner_iters" in raw["schedule"]:
        sched["max_inner_iters"] = int(
            _parse_scalar("max_inner_iters", *raw["schedule"]["max_inner_iters"])
        )
    if "seeds" in raw["schedule"]:
        sched["seeds"] = tuple(
            int(x) for x in _parse_list("seeds", *raw["schedule"]["seeds"])
        )

    ana: dict = {}
    for key, (val, lineno) in raw["analysis"].items():
        if key in ("weiss_factor",):
            ana[key] = int(_parse_scalar(key, val, lineno))
        elif key.endswith(("_center", "_radii", "_scales")) or key in (
            "bands",
            "witness_y",
        ):
            ana[key] = _parse_list(key, val, lineno)
        else:
            ana[key] = _parse_scalar(key, val, lineno)
    weiss_factor = int(ana.pop("weiss_factor", 1))
    if weiss_factor not in (1, 2):
        raise ConfigError("weiss_factor must be 1 or 2")

    return RunConfig(
        spec=spec,
        params=params,
        preset=preset,
        M=_parse_scalar("M", *dom["M"]) if "M" in dom else 1.0,
        gap=_parse_scalar("gap", *dom["gap"]) if "gap" in dom else 0.2,
        table=dom.get("table", (None, 0))[0],
        schedule_overrides=sched,
        analysis=ana,
        outdir=raw["output"].get("dir", ("out", 0))[0],
        weiss_factor=weiss_factor,
    )


def make_boundary_data(cfg: RunConfig, grid: Grid) -> BoundaryData:
    """Boundary data for the configured preset."""
    params = cfg.params
    if cfg.preset == "zero":
        return BoundaryData.zero(grid)
    if cfg.preset == "halfplane_trace":
        c = halfplane_constant(params.lambda_plus, params.p)
        beta = params.beta
        return BoundaryData.from_function(
            grid,
            lambda x1, x2: c * np.maximum(x1, 0.0) ** beta,
            "halfplane_trace",
        )
    if cfg.preset == "two_phase":
        M, half_gap = cfg.M, cfg.gap / 2.0
        return BoundaryData.from_function(
            grid,
            lambda x1, x2: M * np.clip(x2 / half_gap, -1.0, 1.0),
            "two_phase",
        )
    if cfg.table is None:
        raise ConfigError("custom preset needs a table file")
    vals = np.zeros(grid.shape)
    seen = np.zeros(grid.shape, dtype=bool)
    for lineno, line in enumerate(Path(cfg.table).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            si, sj, sv = line.split()
            i, j = int(si), int(sj)
            vals[i, j - grid.jmin] = float(sv)
            seen[i, j - grid.jmin] = True
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"table line {lineno}: {line!r}") from exc
    if not seen[grid.arc].all():
        raise ConfigError("table does not cover every arc node")
    return BoundaryData(grid, np.where(grid.arc, vals, 0.0), "custom",
                        float(np.abs(vals[grid.arc]).max()))


def fnv1a64(data: bytes) -> str:
    """64-bit FNV-1a content hash, hex encoded."""
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


@dataclass
class RunManifest:
    config: dict
    files: list[dict]
    versions: dict
    timings: dict
    status: str = "ok"
    stage_status: dict = field(default_factory=dict)

    def to_json(self) -> str:
        # timings are volatile and live in the unlisted sidecar
        payload = {
            "config": self.config,
            "files": self.files,
            "status": self.status,
            "stages": self.stage_status,
            "versions": self.versions,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


# ---------------------------------------------------------------- SVG ----


def _mapper(bbox, width=800, height=600, margin=50.0):
    (x0, x1), (y0, y1) = bbox
    sx = (width - 2 * margin) / max(x1 - x0, 1e-30)
    sy = (height - 2 * margin) / max(y1 - y0, 1e-30)

    def to_px(x, y):
        return (margin + (x - x0) * sx, height - margin - (y - y0) * sy)

    return to_px


_CLASS_COLORS = {
    "pos_one_phase": "#1f77b4",
    "neg_one_phase": "#d62728",
    "two_phase": "#9467bd",
    "branching": "#ff7f0e",
}


def emit_svg(obj, style: dict | None = None, path=None) -> str:
    """Standalone SVG for a free boundary (with optional cone overlays) or a
    radius series (plain or log-log)."""
    style = dict(style or {})
    width, height = 800, 600
    body = []
    if isinstance(obj, FreeBoundary):
        if obj.vertex_count() == 0:
            raise EmptyDataError("free boundary has no vertices")
        pts = obj.all_vertices()
        bbox = (
            (float(pts[:, 0].min()), float(pts[:, 0].max())),
            (float(pts[:, 1].min()), float(pts[:, 1].max())),
        )
        bbox = style.get("bbox", bbox)
        to_px = _mapper(bbox)
        for cone in style.get("cones", []):
            rho = style.get("rho", 0.1)
            z = cone.apex
            for sgn in (1.0, -1.0):
                tip = to_px(*z)
                a = to_px(z[0] + cone.delta * rho, z[1] + sgn * rho)
                b = to_px(z[0] - cone.delta * rho, z[1] + sgn * rho)
                body.append(
                    f'<path d="M {tip[0]:.3f} {tip[1]:.3f} L {a[0]:.3f} {a[1]:.3f} '
                    f'L {b[0]:.3f} {b[1]:.3f} Z" fill="#2ca02c" fill-opacity="0.25" '
                    'stroke="none"/>'
                )
        for chain in obj.chains:
            start = 0
            n = len(chain.points)
            while start < n:
                cls = chain.classes[start]
                end = start
                while end + 1 < n and chain.classes[end + 1] == cls:
                    end += 1
                seg = chain.points[start : end + 2 if end + 1 < n else n]
                coords = " L ".join(
                    f"{to_px(p[0], p[1])[0]:.3f} {to_px(p[0], p[1])[1]:.3f}"
                    for p in seg
                )
                body.append(
                    f'<path d="M {coords}" fill="none" '
                    f'stroke="{_CLASS_COLORS[cls]}" stroke-width="1.5"/>'
                )
                start = end + 1
    else:
        radii, values = obj
        radii = np.asarray(radii, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if radii.size == 0:
            raise EmptyDataError("empty series")
        if style.get("loglog"):
            radii = np.log(radii)
            values = np.log(np.maximum(values, 1e-300))
        bbox = (
            (float(radii.min()), float(radii.max())),
            (float(values.min()), float(values.max())),
        )
        to_px = _mapper(bbox)
        x_axis = (to_px(bbox[0][0], bbox[1][0]), to_px(bbox[0][1], bbox[1][0]))
        y_axis = (to_px(bbox[0][0], bbox[1][0]), to_px(bbox[0][0], bbox[1][1]))
        for (xa, ya), (xb, yb) in (x_axis, y_axis):
            body.append(
                f'<line x1="{xa:.3f}" y1="{ya:.3f}" x2="{xb:.3f}" y2="{yb:.3f}" '
                'stroke="#333333" stroke-width="1"/>'
            )
        pts = " ".join(
            f"{to_px(r, v)[0]:.3f},{to_px(r, v)[1]:.3f}"
            for r, v in zip(radii, values)
        )
        body.append(
            f'<polyline points="{pts}" fill="none" stroke="#1f77b4" '
            'stroke-width="1.5"/>'
        )
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )
    if path is not None:
        Path(path).write_text(svg)
    return svg


# ------------------------------------------------------------- runner ----


def _write_csv(path: Path, header: list[str], rows) -> None:
    def fmt(x):
        if isinstance(x, (bool, np.bool_)):
            return str(bool(x))
        if isinstance(x, (int, float, np.floating, np.integer)):
            return repr(float(x))
        return str(x)

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _report_json(report) -> str:
    payload = {
        "seed": report.seed,
        "seed_energies": {str(k): v for k, v in sorted(report.seed_energies.items())},
        "final_energy": report.final_energy,
        "converged": report.converged,
        "stages": [
            {
                "eps": st.eps,
                "iterations": st.iterations,
                "energy_smoothed": st.energy_smoothed,
                "grad_norm1": st.grad_norm1,
                "grad_max": st.grad_max,
                "converged": st.converged,
                "energy_trace": st.energy_trace,
            }
            for st in report.stages
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def run(cfg: RunConfig, solution: ScalarField | None = None) -> RunManifest:
    """Execute a configured experiment and write its artifacts.

    With a ``solution`` supplied the minimization step is skipped (the
    ``analyze`` verb).  Deterministic for a given config.
    """
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    stage_status: dict[str, str] = {}
    files: list[tuple[str, bytes]] = []
    grid = build_grid(cfg.spec)
    params = cfg.params
    h = grid.h
    beta = params.beta

    def add_file(name: str, data) -> None:
        blob = data if isinstance(data, bytes) else data.encode("utf-8")
        (outdir / name).write_bytes(blob)
        files.append((name, blob))

    t0 = time.perf_counter()
    if solution is None:
        f = make_boundary_data(cfg, grid)
        sched = default_schedule(grid, params)
        if cfg.schedule_overrides:
            sched = replace(sched, **cfg.schedule_overrides)
        u, report = minimize(grid, f, params, sched)
        add_file("report.json", _report_json(report))
        stage_status["minimize"] = "ok" if report.converged else "no-convergence"
    else:
        u = solution
        stage_status["minimize"] = "skipped"
    timings["minimize"] = time.perf_counter() - t0

    add_file("solution.field", save_field(u))

    summary: dict = {}
    t0 = time.perf_counter()
    tau = float(cfg.analysis.get("tau", h**beta))
    fb = extract_free_boundary(u, tau, params=params)
    if fb.vertex_count() > 0:
        add_file("boundary.json", boundary_to_json(fb))
        cones = []
        if "cone_delta" in cfg.analysis and "cone_rho" in cfg.analysis:
            delta = float(cfg.analysis["cone_delta"])
            rho = float(cfg.analysis["cone_rho"])
            pts = fb.all_vertices()
            contact = pts[pts[:, 0] < 2 * h]
            cone_results = []
            for apex in contact:
                if grid.outer_clearance((apex[0], apex[1])) < rho:
                    continue
                cone = ConeSpec((float(apex[0]), float(apex[1])), delta)
                ok, offending = cone_check(fb, cone, rho)
                cones.append(cone)
                cone_results.append(
                    {
                        "apex": [float(apex[0]), float(apex[1])],
                        "inside": bool(ok),
                        "offending": int(len(offending)),
                    }
                )
            summary["cone"] = {"delta": delta, "rho": rho, "apexes": cone_results}
        bbox = ((0.0, cfg.spec.radius), (-cfg.spec.radius, cfg.spec.radius))
        add_file(
            "boundary.svg",
            emit_svg(fb, {"cones": cones, "rho": cfg.analysis.get("cone_rho", 0.1),
                          "bbox": bbox}),
        )
        if "bands" in cfg.analysis:
            bands = tangency_profile(fb, list(cfg.analysis["bands"]))
            _write_csv(
                outdir / "tangency.csv",
                ["band_lo", "band_hi", "max_deviation"],
                [
                    (a, b, "" if dev is None else repr(dev))
                    for (a, b), dev in bands
                ],
            )
            files.append(
                ("tangency.csv", (outdir / "tangency.csv").read_bytes())
            )
            summary["tangency"] = [
                {"band": [a, b], "max_deviation": dev} for (a, b), dev in bands
            ]
    stage_status["extract"] = "ok"
    timings["extract"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ana = cfg.analysis
    if "weiss_center" in ana and "weiss_radii" in ana:
        ws = weiss_series(
            u,
            tuple(ana["weiss_center"]),
            ana["weiss_radii"],
            params,
            slack_tol=0.0,
            weiss_factor=cfg.weiss_factor,
        )
        rng = float(ws.values.max() - ws.values.min())
        slack_tol = float(ana.get("weiss_slack_rel", 0.05)) * rng
        verdict = bool((np.diff(ws.values) >= -slack_tol).all())
        _write_csv(outdir / "weiss.csv", ["r", "W"], zip(ws.radii, ws.values))
        files.append(("weiss.csv", (outdir / "weiss.csv").read_bytes()))
        add_file("weiss.svg", emit_svg((ws.radii, ws.values)))
        summary["weiss"] = {
            "monotone": verdict,
            "slack": ws.slack,
            "range": rng,
            "factor": cfg.weiss_factor,
        }
    if "growth_center" in ana and "growth_radii" in ana:
        gf = growth_fit(u, tuple(ana["growth_center"]), ana["growth_radii"])
        _write_csv(outdir / "growth.csv", ["r", "sup"], zip(gf.radii, gf.suprema))
        files.append(("growth.csv", (outdir / "growth.csv").read_bytes()))
        add_file("growth.svg", emit_svg((gf.radii, gf.suprema), {"loglog": True}))
        summary["growth"] = {
            "exponent": gf.exponent,
            "amplitude": gf.amplitude,
            "beta": beta,
        }
    if "nondeg_center" in ana and "nondeg_radii" in ana:
        nd = nondeg_check(u, tuple(ana["nondeg_center"]), ana["nondeg_radii"], params)
        _write_csv(
            outdir / "nondeg.csv",
            ["r", "measured", "floor", "pass"],
            zip(nd.radii, nd.measured, nd.floors, nd.passes),
        )
        files.append(("nondeg.csv", (outdir / "nondeg.csv").read_bytes()))
        summary["nondeg"] = {
            "floor_constant": nd.floor_constant,
            "all_pass": nd.all_pass,
        }
    if "campanato_center" in ana and "campanato_radii" in ana:
        alpha, a0 = campanato_rate(
            u, tuple(ana["campanato_center"]), ana["campanato_radii"]
        )
        summary["campanato"] = {
            "alpha": alpha,
            "A0": [float(a0[0]), float(a0[1])],
            "beta_minus_1": beta - 1.0,
        }
    if "blowup_scales" in ana:
        center = tuple(ana.get("blowup_center", [0.0, 0.0]))
        ref_spec = DomainSpec(h=float(ana.get("blowup_h", h)), radius=1.0)
        ref_grid = build_grid(ref_spec)
        seq = blowup_sequence(u, center, ana["blowup_scales"], ref_grid, params)
        _write_csv(
            outdir / "blowup.csv",
            ["scale", "c_fit", "sign", "linf_error"],
            [
                (r, m.c_fit, m.sign, m.linf_error)
                for r, m in zip(seq.scales, seq.matches)
            ],
        )
        files.append(("blowup.csv", (outdir / "blowup.csv").read_bytes()))
        summary["blowup"] = [
            {"scale": float(r), "c_fit": m.c_fit, "linf_error": m.linf_error}
            for r, m in zip(seq.scales, seq.matches)
        ]
    if "witness_y" in ana:
        wmin = subharmonic_witness(u, tuple(ana["witness_y"]), params)
        summary["witness"] = {"min_laplacian": wmin, "y": list(ana["witness_y"])}
    if summary:
        add_file("analysis.json", json.dumps(summary, indent=2, sort_keys=True))
    stage_status["analysis"] = "ok"
    timings["analysis"] = time.perf_counter() - t0

    hashed = [
        {"path": name, "fnv1a64": fnv1a64(blob)}
        for name, blob in sorted(files, key=lambda kv: kv[0])
    ]
    manifest = RunManifest(
        config=cfg.echo(),
        files=hashed,
        versions={"fbx": __version__},
        timings=timings,
        stage_status=stage_status,
    )
    (outdir / "manifest.json").write_text(manifest.to_json())
    (outdir / "timings.json").write_text(
        json.dumps(timings, indent=2, sort_keys=True)
    )
    return manifest


def _fail_manifest(cfg: RunConfig, stage: str, err: Exception) -> None:
    try:
        outdir = Path(cfg.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(
            config=cfg.echo(),
            files=[],
            versions={"fbx": __version__},
            timings={},
            status="failed",
            stage_status={stage: f"failed: {err}"},
        )
        (outdir / "manifest.json").write_text(manifest.to_json())
    except OSError:
        pass


# ---------------------------------------------------------------- main ----

_SWEEP_KEYS = {
    "p": ("energy", "p"),
    "lambda_plus": ("energy", "lambda_plus"),
    "lambda_minus": ("energy", "lambda_minus"),
    "h": ("domain", "h"),
    "R": ("domain", "R"),
    "M": ("domain", "M"),
    "gap": ("domain", "gap"),
}


def _override(cfg: RunConfig, key: str, value: float) -> RunConfig:
    if key == "p":
        params = EnergyParams(cfg.params.lambda_plus, cfg.params.lambda_minus, value)
        return replace(cfg, params=params)
    if key == "lambda_plus":
        params = EnergyParams(value, cfg.params.lambda_minus, cfg.params.p)
        return replace(cfg, params=params)
    if key == "lambda_minus":
        params = EnergyParams(cfg.params.lambda_plus, value, cfg.params.p)
        return replace(cfg, params=params)
    if key == "h":
        return replace(cfg, spec=replace(cfg.spec, h=value))
    if key == "R":
        return replace(cfg, spec=replace(cfg.spec, radius=value))
    if key == "M":
        return replace(cfg, M=value)
    if key == "gap":
        return replace(cfg, gap=value)
    raise ConfigError(f"cannot sweep key {key!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fbx", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    p_solve = sub.add_parser("solve", help="minimize and analyze")
    p_solve.add_argument("config")
    p_analyze = sub.add_parser("analyze", help="analyses on a saved field")
    p_analyze.add_argument("config")
    p_analyze.add_argument("field")
    p_sweep = sub.add_parser("sweep", help="one run per parameter value")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help="key=v1,v2,...")
    p_report = sub.add_parser("report", help="verify a manifest")
    p_report.add_argument("manifest")
    args = parser.parse_args(argv)

    if args.verb == "report":
        return _verb_report(args.manifest)

    try:
        cfg = parse_config(Path(args.config).read_text())
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.verb == "solve":
        try:
            manifest = run(cfg)
        except Exception as exc:  # noqa: BLE001 - boundary of the CLI
            _fail_manifest(cfg, "run", exc)
            print(f"compute failure: {exc}", file=sys.stderr)
            return 3
        print(f"wrote {len(manifest.files)} files to {cfg.outdir}")
        return 0

    if args.verb == "analyze":
        try:
            field_blob = Path(args.field).read_bytes()
            u = load_field(field_blob)
        except (OSError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        try:
            manifest = run(cfg, solution=u)
        except Exception as exc:  # noqa: BLE001
            _fail_manifest(cfg, "analyze", exc)
            print(f"compute failure: {exc}", file=sys.stderr)
            return 3
        print(f"wrote {len(manifest.files)} files to {cfg.outdir}")
        return 0

    if args.verb == "sweep":
        if "=" not in args.param:
            print("config error: --param needs key=v1,v2,...", file=sys.stderr)
            return 2
        key, vals = args.param.split("=", 1)
        if key not in _SWEEP_KEYS:
            print(f"config error: unknown sweep key {key!r}", file=sys.stderr)
            return 2
        try:
            values = [float(v) for v in vals.split(",")]
        except ValueError:
            print(f"config error: bad sweep values {vals!r}", file=sys.stderr)
            return 2
        entries = []
        for v in values:
            try:
                sub_cfg = _override(cfg, key, v)
                sub_cfg = replace(
                    sub_cfg, outdir=str(Path(cfg.outdir) / f"{key}={v:g}")
                )
            except (ConfigError, ValueError) as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return 2
            try:
                run(sub_cfg)
            except Exception as exc:  # noqa: BLE001
                _fail_manifest(sub_cfg, "run", exc)
                print(f"compute failure at {key}={v:g}: {exc}", file=sys.stderr)
                return 3
            entries.append({"value": v, "dir": f"{key}={v:g}"})
        Path(cfg.outdir, "sweep.json").write_text(
            json.dumps({"param": key, "runs": entries}, indent=2, sort_keys=True)
        )
        print(f"swept {key} over {len(values)} values into {cfg.outdir}")
        return 0

    return 2


def _verb_report(manifest_path: str) -> int:
    try:
        raw = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    base = Path(manifest_path).parent
    bad = 0
    for entry in raw.get("files", []):
        path = base / entry["path"]
        try:
            actual = fnv1a64(path.read_bytes())
        except OSError:
            print(f"MISSING  {entry['path']}")
            bad += 1
            continue
        if actual == entry["fnv1a64"]:
            print(f"OK       {entry['path']}  {actual}")
        else:
            print(f"MISMATCH {entry['path']}  {actual} != {entry['fnv1a64']}")
            bad += 1
    if raw.get("status") != "ok":
        print(f"status: {raw.get('status')}")
        bad += 1
    return 0 if bad == 0 else 3


if __name__ == "__main__":
    sys.exit(main())
