"""Batch execution: manifest loading, seeded per-record attacks, reporting.

A manifest is JSON lines, one record per line: {"id", "image_path",
"captions": [...], "question"?, "answer"?}. run_batch derives a per-record
seed from the master seed by a splitmix step (insertion or failure of one
record never perturbs the others' seeds), runs the full attack pipeline per
record on a worker pool, evaluates similarity/quality metrics, and isolates
per-record failures. Reports serialize to JSON + CSV plus one adversarial PNG
per successful record.
"""

from __future__ import annotations

import csv
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from .attack import AttackConfig, run_pipeline
from .errors import ManifestError
from .imagecore import Image, png_decode, png_encode
from .lightgen import LightingParams
from .metrics.niqe import NiqeModel, load_niqe_model, niqe_score
from .recommender import Recommender, RecommenderConfig
from .relight import RelightBackend, RemoteRelight, SurrogateRelight, SurrogateRelightConfig
from .victim import LossBreakdown, RemoteVictim, SurrogateVictim, VictimBackend

_U64 = 0xFFFFFFFFFFFFFFFF


def derive_record_seed(master_seed: int, index: int) -> int:
    """splitmix64 of master_seed + (index+1) * golden gamma; pure in (seed, index)."""
    x = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _U64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _U64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _U64
    x ^= x >> 31
    return x


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    image_path: str
    captions: tuple = ()
    question: str | None = None
    answer: str | None = None

    @property
    def attack_text(self) -> str:
        """Target text for the loss: first caption, else the VQA answer."""
        return self.captions[0] if self.captions else self.answer


def _parse_record(obj: dict, lineno: int) -> DatasetRecord:
    def fail(msg):
        raise ManifestError(f"line {lineno}: {msg}")

    if not isinstance(obj, dict):
        fail(f"record must be an object, got {type(obj).__name__}")
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid:
        fail("missing or empty 'id'")
    path = obj.get("image_path")
    if not isinstance(path, str) or not path:
        fail("missing or empty 'image_path'")
    captions = obj.get("captions", [])
    if not isinstance(captions, list) or not all(isinstance(c, str) and c for c in captions):
        fail("'captions' must be a list of non-empty strings")
    question = obj.get("question")
    answer = obj.get("answer")
    if (question is None) != (answer is None):
        fail("'question' and 'answer' must be present together")
    if question is not None and (not isinstance(question, str) or not isinstance(answer, str)):
        fail("'question' and 'answer' must be strings")
    if not captions and question is None:
        fail("record needs captions (captioning) or question+answer (VQA)")
    unknown = set(obj) - {"id", "image_path", "captions", "question", "answer"}
    if unknown:
        fail(f"unknown fields {sorted(unknown)}")
    return DatasetRecord(rid, path, tuple(captions), question, answer)


def load_manifest(path) -> list:
    """Read and validate a JSON-lines manifest; duplicate ids are rejected."""
    records = []
    seen = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise ManifestError(f"line {lineno}: invalid JSON: {exc}") from exc
            record = _parse_record(obj, lineno)
            if record.id in seen:
                raise ManifestError(
                    f"line {lineno}: duplicate id {record.id!r} (first seen on line {seen[record.id]})"
                )
            seen[record.id] = lineno
            records.append(record)
    return records


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Batch-run settings, usually loaded from a TOML file."""

    attack: AttackConfig = AttackConfig()
    backend: str = "surrogate"
    endpoint: str | None = None
    timeout: float = 30.0
    max_in_flight: int = 4
    relight_floor: float = 0.3
    relight_gain: float = 0.7
    nat_weight: float = 1.0
    recommender: RecommenderConfig = RecommenderConfig()
    niqe_model_path: str | None = None
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.backend not in ("surrogate", "remote"):
            raise ValueError(f"backend must be 'surrogate' or 'remote', got {self.backend!r}")
        if self.backend == "remote" and not self.endpoint:
            raise ValueError("remote backend requires an endpoint")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _take(section: dict, known: dict, where: str) -> dict:
    unknown = set(section) - set(known)
    if unknown:
        raise ValueError(f"unknown keys {sorted(unknown)} in config section {where!r}")
    return {known[k]: v for k, v in section.items()}


def load_config(path) -> RunConfig:
    """Parse a TOML run configuration.

    Sections: [attack] mirrors AttackConfig; [backend] mode/endpoint/timeout/
    max_in_flight; [surrogate] relight_floor/relight_gain/nat_weight;
    [recommender] endpoint/model/api_key_env/timeout/attach_image; [metrics]
    niqe_model. Top level: master_seed, workers. The recommender API key is
    read from the environment variable named by api_key_env, never from the
    file itself.
    """
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    top = {k: v for k, v in data.items() if not isinstance(v, dict)}
    kwargs = _take(top, {"master_seed": "master_seed", "workers": "workers"}, "top level")
    sections = {k: v for k, v in data.items() if isinstance(v, dict)}
    unknown_sections = set(sections) - {"attack", "backend", "surrogate", "recommender", "metrics"}
    if unknown_sections:
        raise ValueError(f"unknown config sections {sorted(unknown_sections)}")
    if "attack" in sections:
        fields = {
            k: k
            for k in (
                "param_step",
                "image_step",
                "param_iters",
                "image_iters",
                "resize_count",
                "scale_factors",
                "keep_best",
                "seed",
            )
        }
        attack_kwargs = _take(sections["attack"], fields, "attack")
        if "scale_factors" in attack_kwargs:
            attack_kwargs["scale_factors"] = tuple(attack_kwargs["scale_factors"])
        kwargs["attack"] = AttackConfig(**attack_kwargs)
    if "backend" in sections:
        kwargs.update(
            _take(
                sections["backend"],
                {"mode": "backend", "endpoint": "endpoint", "timeout": "timeout", "max_in_flight": "max_in_flight"},
                "backend",
            )
        )
    if "surrogate" in sections:
        kwargs.update(
            _take(
                sections["surrogate"],
                {"relight_floor": "relight_floor", "relight_gain": "relight_gain", "nat_weight": "nat_weight"},
                "surrogate",
            )
        )
    if "recommender" in sections:
        rec_kwargs = _take(
            sections["recommender"],
            {k: k for k in ("endpoint", "model", "api_key_env", "timeout", "max_in_flight", "attach_image")},
            "recommender",
        )
        kwargs["recommender"] = RecommenderConfig(**rec_kwargs)
    if "metrics" in sections:
        kwargs.update(_take(sections["metrics"], {"niqe_model": "niqe_model_path"}, "metrics"))
    return RunConfig(**kwargs)


def build_backends(config: RunConfig):
    """Construct (relighter, victim) per the configured mode."""
    if config.backend == "remote":
        relighter = RemoteRelight(
            config.endpoint, timeout=config.timeout, max_in_flight=config.max_in_flight
        )
        victim = RemoteVictim(
            config.endpoint, timeout=config.timeout, max_in_flight=config.max_in_flight
        )
        return relighter, victim
    relighter = SurrogateRelight(SurrogateRelightConfig(config.relight_floor, config.relight_gain))
    victim = SurrogateVictim(nat_weight=config.nat_weight)
    return relighter, victim


# ---------------------------------------------------------------------------
# batch run
# ---------------------------------------------------------------------------


@dataclass
class RecordResult:
    record_id: str
    seed: int
    ok: bool
    error: str | None = None
    initial_loss: LossBreakdown | None = None
    final_loss: LossBreakdown | None = None
    loss_gain: float | None = None
    match_sim_clean: float | None = None
    match_sim_adv: float | None = None
    niqe_clean: float | None = None
    niqe_adv: float | None = None
    wall_time_s: float = 0.0
    final_params: LightingParams | None = None
    recommendation_source: str | None = None
    adv_image: Image | None = None  # kept for write_report; not serialized


@dataclass
class RunReport:
    master_seed: int
    backend: str
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)


def _match_similarity(victim: VictimBackend, candidate: Image, clean: Image, record: DatasetRecord) -> float:
    """Mean image-text similarity over the record's texts (1 - match_term)."""
    texts = list(record.captions) if record.captions else [record.answer]
    sims = [1.0 - victim.loss(candidate, clean, t).match_term for t in texts]
    return sum(sims) / len(sims)


def _run_record(
    index: int,
    record: DatasetRecord,
    config: RunConfig,
    relighter: RelightBackend,
    victim: VictimBackend,
    recommender,
    niqe_model: NiqeModel | None,
) -> RecordResult:
    seed = derive_record_seed(config.master_seed, index)
    started = time.perf_counter()
    try:
        image = png_decode(Path(record.image_path).read_bytes())
        attack_config = replace(config.attack, seed=seed)
        result = run_pipeline(attack_config, relighter, victim, recommender, image, record.attack_text)
        initial = result.loss_trace[0]
        final = max(result.loss_trace, key=lambda b: b.total)
        out = RecordResult(
            record_id=record.id,
            seed=seed,
            ok=True,
            initial_loss=initial,
            final_loss=final,
            loss_gain=final.total - initial.total,
            match_sim_clean=_match_similarity(victim, image, image, record),
            match_sim_adv=_match_similarity(victim, result.final_image, image, record),
            final_params=result.final_params,
            recommendation_source=result.recommendation.source.value if result.recommendation else None,
            adv_image=result.final_image,
        )
        if niqe_model is not None:
            out.niqe_clean = niqe_score(niqe_model, image)
            out.niqe_adv = niqe_score(niqe_model, result.final_image)
        out.wall_time_s = time.perf_counter() - started
        return out
    except Exception as exc:  # per-record isolation: one bad record must not kill the batch
        return RecordResult(
            record_id=record.id,
            seed=seed,
            ok=False,
            error=f"{type(exc).__name__}: {exc}",
            wall_time_s=time.perf_counter() - started,
        )


_MEAN_FIELDS = (
    ("mean_initial_loss", lambda r: r.initial_loss.total),
    ("mean_final_loss", lambda r: r.final_loss.total),
    ("mean_loss_gain", lambda r: r.loss_gain),
    ("mean_match_sim_clean", lambda r: r.match_sim_clean),
    ("mean_match_sim_adv", lambda r: r.match_sim_adv),
    ("mean_niqe_clean", lambda r: r.niqe_clean),
    ("mean_niqe_adv", lambda r: r.niqe_adv),
    ("mean_wall_time_s", lambda r: r.wall_time_s),
)


def _aggregate(records: list) -> dict:
    ok = [r for r in records if r.ok]
    agg = {
        "n_records": len(records),
        "n_ok": len(ok),
        "n_failed": len(records) - len(ok),
    }
    for name, getter in _MEAN_FIELDS:
        values = [getter(r) for r in ok if getter(r) is not None] if ok else []
        if values:
            agg[name] = sum(values) / len(values)
    return agg


def run_batch(
    config: RunConfig,
    manifest: list,
    relighter: RelightBackend | None = None,
    victim: VictimBackend | None = None,
    recommender=None,
    niqe_model: NiqeModel | None = None,
) -> RunReport:
    """Attack every manifest record; failures are recorded, not raised.

    Backends not passed in are built from the config. Results are assembled
    in manifest order regardless of worker count, so reports are
    deterministic for deterministic backends.
    """
    if relighter is None or victim is None:
        built_relighter, built_victim = build_backends(config)
        relighter = relighter or built_relighter
        victim = victim or built_victim
    if recommender is None:
        recommender = Recommender(config.recommender)
    if niqe_model is None and config.niqe_model_path:
        niqe_model = load_niqe_model(config.niqe_model_path)

    def work(item):
        index, record = item
        return _run_record(index, record, config, relighter, victim, recommender, niqe_model)

    if config.workers == 1 or len(manifest) <= 1:
        results = [work(item) for item in enumerate(manifest)]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, enumerate(manifest)))
    return RunReport(
        master_seed=config.master_seed,
        backend=config.backend,
        records=results,
        aggregates=_aggregate(results),
    )


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def _breakdown_dict(b: LossBreakdown | None):
    if b is None:
        return None
    return {"total": b.total, "match_term": b.match_term, "nat_term": b.nat_term}


def _params_dict(p: LightingParams | None):
    if p is None:
        return None
    return {
        "start_color": list(p.start_color),
        "end_color": list(p.end_color),
        "direction": p.direction.value,
        "weight": p.weight,
    }


def record_to_dict(r: RecordResult) -> dict:
    return {
        "id": r.record_id,
        "seed": r.seed,
        "ok": r.ok,
        "error": r.error,
        "initial_loss": _breakdown_dict(r.initial_loss),
        "final_loss": _breakdown_dict(r.final_loss),
        "loss_gain": r.loss_gain,
        "match_sim_clean": r.match_sim_clean,
        "match_sim_adv": r.match_sim_adv,
        "niqe_clean": r.niqe_clean,
        "niqe_adv": r.niqe_adv,
        "wall_time_s": r.wall_time_s,
        "lighting": _params_dict(r.final_params),
        "recommendation_source": r.recommendation_source,
    }


def report_to_dict(report: RunReport) -> dict:
    return {
        "master_seed": report.master_seed,
        "backend": report.backend,
        "records": [record_to_dict(r) for r in report.records],
        "aggregates": report.aggregates,
    }


def report_fingerprint(report: RunReport, include_timing: bool = False) -> str:
    """Canonical JSON of a report; wall-time fields (the only nondeterministic
    values in surrogate mode) are zeroed unless include_timing is set."""
    payload = report_to_dict(report)
    if not include_timing:
        for row in payload["records"]:
            row["wall_time_s"] = 0.0
        payload["aggregates"].pop("mean_wall_time_s", None)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


_CSV_COLUMNS = (
    "id",
    "seed",
    "ok",
    "error",
    "initial_total",
    "initial_match",
    "initial_nat",
    "final_total",
    "final_match",
    "final_nat",
    "loss_gain",
    "match_sim_clean",
    "match_sim_adv",
    "niqe_clean",
    "niqe_adv",
    "wall_time_s",
    "start_color",
    "end_color",
    "direction",
    "weight",
    "recommendation_source",
)


def _csv_row(r: RecordResult) -> list:
    def fmt_color(c):
        return " ".join(repr(v) for v in c)

    return [
        r.record_id,
        r.seed,
        int(r.ok),
        r.error or "",
        r.initial_loss.total if r.initial_loss else "",
        r.initial_loss.match_term if r.initial_loss else "",
        r.initial_loss.nat_term if r.initial_loss else "",
        r.final_loss.total if r.final_loss else "",
        r.final_loss.match_term if r.final_loss else "",
        r.final_loss.nat_term if r.final_loss else "",
        r.loss_gain if r.loss_gain is not None else "",
        r.match_sim_clean if r.match_sim_clean is not None else "",
        r.match_sim_adv if r.match_sim_adv is not None else "",
        r.niqe_clean if r.niqe_clean is not None else "",
        r.niqe_adv if r.niqe_adv is not None else "",
        r.wall_time_s,
        fmt_color(r.final_params.start_color) if r.final_params else "",
        fmt_color(r.final_params.end_color) if r.final_params else "",
        r.final_params.direction.value if r.final_params else "",
        r.final_params.weight if r.final_params else "",
        r.recommendation_source or "",
    ]


def write_report(report: RunReport, out_dir) -> list:
    """Write report.json, report.csv, and per-record adversarial PNGs.

    Returns the list of written paths. I/O failures carry the target path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def write_bytes(path: Path, data: bytes):
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise OSError(f"failed writing {path}: {exc}") from exc
        written.append(path)

    write_bytes(out / "report.json", json.dumps(report_to_dict(report), indent=2, sort_keys=True).encode())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for r in report.records:
        writer.writerow(_csv_row(r))
    write_bytes(out / "report.csv", buf.getvalue().encode())
    for r in report.records:
        if r.ok and r.adv_image is not None:
            write_bytes(out / f"{r.record_id}_adv.png", png_encode(r.adv_image))
    return written
