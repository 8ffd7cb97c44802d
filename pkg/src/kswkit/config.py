"""Flat ``key = value`` configuration files."""

from __future__ import annotations

from pathlib import Path

from kswkit.errors import ConfigError


def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path: str | Path | None) -> dict[str, str]:
    if path is None:
        return {}
    return parse_config(Path(path).read_text())


class Config:
    """Typed accessors over the raw string map."""

    def __init__(self, raw: dict[str, str] | None = None):
        self.raw = dict(raw or {})

    def _get(self, key: str):
        return self.raw.get(key)

    def get_int(self, key: str, default: int | None = None) -> int | None:
        v = self._get(key)
        if v is None or v == "":
            return default
        try:
            return int(v, 0)
        except ValueError as exc:
            raise ConfigError(f"{key}: not an integer: {v!r}") from exc

    def get_float(self, key: str, default: float | None = None) -> float | None:
        v = self._get(key)
        if v is None or v == "":
            return default
        try:
            return float(v)
        except ValueError as exc:
            raise ConfigError(f"{key}: not a number: {v!r}") from exc

    def get_str(self, key: str, default: str | None = None) -> str | None:
        v = self._get(key)
        return default if v is None else v

    def get_ints(self, key: str, default: list[int] | None = None) -> list[int]:
        """Comma-separated integers; an explicitly empty value gives []."""
        v = self._get(key)
        if v is None:
            return list(default or [])
        parts = [p.strip() for p in v.split(",") if p.strip()]
        try:
            return [int(p, 0) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"{key}: not an integer list: {v!r}") from exc

    def has(self, key: str) -> bool:
        return key in self.raw
