"""Line-oriented `key = value` run configuration with typed access.

Unknown keys are rejected. Every value records where it came from (default,
file, or CLI override) and the fully-resolved config is logged per run.
Model defaults are the desk-scale toy configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from quadscan.errors import ConfigError
from quadscan.fusion import PATH_NAMES
from quadscan.tracker.model import MODALITY_ORDER, TrackerConfig
from quadscan.tracker.train import TrainSchedule, get_preset

# key -> (type tag, default-as-string, help)
SCHEMA: dict[str, tuple[str, str, str]] = {
    "seed": ("int", "0", "base seed for all randomness in the run"),
    "model.search_size": ("int", "64", "search crop side in pixels"),
    "model.template_size": ("int", "32", "template crop side in pixels"),
    "model.patch_size": ("int", "8", "patch side in pixels"),
    "model.embed_dim": ("int", "32", "token channel count"),
    "model.depth": ("int", "2", "number of backbone blocks"),
    "model.mlp_ratio": ("int", "2", "backbone MLP expansion"),
    "model.head_hidden": ("int", "32", "head branch hidden width"),
    "modalities": ("list", "rgb,tir,event,lang", "active streams"),
    "mfm.paths": ("list", "forward,backward,region,token", "enabled fusion scan paths"),
    "mfm.blocks": ("intlist", "1", "backbone indices followed by a fusion block"),
    "mfm.expand": ("int", "1", "fusion inner expansion factor"),
    "mfm.d_state": ("int", "4", "scan state dims per channel"),
    "mfm.conv_width": ("int", "4", "causal conv width"),
    "loss.iou_weight": ("float", "2.0", "box overlap loss weight"),
    "loss.l1_weight": ("float", "5.0", "normalized L1 loss weight"),
    "track.context_factor": ("float", "2.0", "template crop side per target side"),
    "track.search_factor": ("float", "2.0", "search crop side per template side"),
    "train.preset": ("str", "toy", "schedule preset: toy or paper"),
    "train.epochs": ("str", "", "override preset epochs"),
    "train.batch_size": ("str", "", "override preset batch size"),
    "train.lr": ("str", "", "override preset learning rate"),
    "train.lr_decay_epoch": ("str", "", "override preset decay epoch"),
    "train.lr_decay": ("str", "", "override preset decay factor"),
    "train.weight_decay": ("str", "", "override preset weight decay"),
    "train.sequence_repeats": ("str", "", "override preset samples per sequence per epoch"),
    "scan.m": ("int", "4", "modalities for scan-dump"),
    "scan.n_z": ("int", "16", "template tokens for scan-dump"),
    "scan.n_x": ("int", "64", "search tokens for scan-dump"),
    "bench.lengths": ("intlist", "20,40,80,160", "per-modality token lengths"),
    "bench.dim": ("int", "16", "benchmark channel count"),
    "bench.expand": ("int", "2", "benchmark fusion expansion"),
    "bench.d_state": ("int", "8", "benchmark scan state dims"),
    "bench.conv_width": ("int", "4", "benchmark conv width"),
    "bench.warmups": ("int", "2", "timing warmup runs"),
    "bench.repeats": ("int", "5", "timed runs per measurement (median)"),
}

MODALITY_ALIASES = {
    "rgb": "rgb", "t": "tir", "tir": "tir", "e": "event", "event": "event",
    "l": "lang", "lang": "lang",
}


def _coerce(key: str, raw: str):
    tag = SCHEMA[key][0]
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "intlist":
            return tuple(int(v) for v in raw.split(",") if v.strip() != "")
        if tag == "list":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for key '{key}' (expects {tag})") from exc


@dataclass
class RunConfig:
    values: dict[str, object]
    provenance: dict[str, str]

    @classmethod
    def load(cls, path=None, overrides: list[str] | None = None) -> "RunConfig":
        values = {k: _coerce(k, spec[1]) for k, spec in SCHEMA.items()}
        provenance = {k: "default" for k in SCHEMA}
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
            for line_no, raw in enumerate(text.splitlines(), start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected key = value, got {raw!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in SCHEMA:
                    raise ConfigError(f"{path}:{line_no}: unknown key '{key}'")
                values[key] = _coerce(key, value)
                provenance[key] = f"file:{path}"
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"override '{item}' is not key=value")
            key, value = (part.strip() for part in item.split("=", 1))
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key '{key}'")
            values[key] = _coerce(key, value)
            provenance[key] = "cli"
        return cls(values, provenance)

    def set(self, key: str, raw: str, source: str = "cli") -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key '{key}'")
        self.values[key] = _coerce(key, raw)
        self.provenance[key] = source

    def get(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key '{key}'")
        return self.values[key]

    def resolved_text(self) -> str:
        lines = [
            f"{key} = {_format_value(self.values[key])}  # {self.provenance[key]}"
            for key in sorted(SCHEMA)
        ]
        return "\n".join(lines) + "\n"

    def modalities(self) -> tuple[str, ...]:
        raw = self.get("modalities")
        mapped = []
        for name in raw:
            if name not in MODALITY_ALIASES:
                raise ConfigError(
                    f"unknown modality '{name}'; valid: {sorted(set(MODALITY_ALIASES))}"
                )
            mapped.append(MODALITY_ALIASES[name])
        return tuple(m for m in MODALITY_ORDER if m in mapped)

    def fusion_paths(self) -> tuple[str, ...]:
        paths = self.get("mfm.paths")
        unknown = [p for p in paths if p not in PATH_NAMES]
        if unknown:
            raise ConfigError(f"unknown fusion paths {unknown}; valid: {list(PATH_NAMES)}")
        return tuple(paths)

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(
            search_size=self.get("model.search_size"),
            template_size=self.get("model.template_size"),
            patch_size=self.get("model.patch_size"),
            embed_dim=self.get("model.embed_dim"),
            depth=self.get("model.depth"),
            mlp_ratio=self.get("model.mlp_ratio"),
            modalities=self.modalities(),
            fusion_blocks=self.get("mfm.blocks"),
            fusion_paths=self.fusion_paths(),
            fusion_expand=self.get("mfm.expand"),
            state_dim=self.get("mfm.d_state"),
            conv_width=self.get("mfm.conv_width"),
            head_hidden=self.get("model.head_hidden"),
            iou_weight=self.get("loss.iou_weight"),
            l1_weight=self.get("loss.l1_weight"),
            context_factor=self.get("track.context_factor"),
            search_factor=self.get("track.search_factor"),
        )

    def schedule(self) -> TrainSchedule:
        base = get_preset(self.get("train.preset"))
        fields = {
            "epochs": int, "batch_size": int, "lr": float,
            "lr_decay_epoch": int, "lr_decay": float,
            "weight_decay": float, "sequence_repeats": int,
        }
        kwargs = {}
        for name, cast in fields.items():
            raw = self.get(f"train.{name}")
            if raw != "":
                try:
                    kwargs[name] = cast(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value {raw!r} for train.{name}") from exc
            else:
                kwargs[name] = getattr(base, name)
        return TrainSchedule(**kwargs)


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)
