"""Layered pipeline configuration: defaults < file < environment < flags."""
from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Mapping

from .acquire import DEFAULT_URL_TEMPLATE
from .graph import DEFAULT_STATEMENT_SIZE
from .model import VocabularySet
from .ontology import DEFAULT_BASE_IRI, DEFAULT_RESTRICTIONS, OntologyConfig, parse_restrictions
from .vaers import VaersColumns

ENV_PREFIX = "FAERS2OWL_"
CONFIG_ENV = ENV_PREFIX + "CONFIG"

DEFAULTS: dict[str, str] = {
    "acquire.url_template": DEFAULT_URL_TEMPLATE,
    "acquire.retries": "3",
    "acquire.dest_dir": "data/raw",
    "cypher.statement_size": str(DEFAULT_STATEMENT_SIZE),
    "ontology.base_iri": DEFAULT_BASE_IRI,
    "ontology.owl_class_typing": "true",
    "ontology.causal_links": "pairwise",
    "ontology.restrictions": "; ".join(" ".join(r) for r in DEFAULT_RESTRICTIONS),
    "vaers.id_column": "VAERS_ID",
    "vaers.symptom_columns": ",".join(VaersColumns().symptom_columns),
    "vaers.vaccine_column": "VAX_TYPE",
    "vaers.encoding": "utf-8",
    "vaers.fallback_encoding": "latin-1",
    "vocab.dir": "",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or "." not in key:
            raise ConfigError(f"{origin}:{lineno}: expected 'section.key = value'")
        values[key] = value.strip()
    return values


def env_overrides(environ: Mapping[str, str]) -> dict[str, str]:
    """``FAERS2OWL_ONTOLOGY__BASE_IRI=...`` overrides ``ontology.base_iri``."""
    values = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX) and "__" in name:
            section, _, key = name[len(ENV_PREFIX):].partition("__")
            values[f"{section.lower()}.{key.lower()}"] = value
    return values


def _check_keys(values: Mapping[str, str], origin: str) -> None:
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"{origin}: unknown configuration key(s): {', '.join(unknown)}")


class PipelineConfig:
    def __init__(self, values: Mapping[str, str]):
        self.values = dict(values)

    @classmethod
    def resolve(
        cls,
        config_path: str | Path | None = None,
        overrides: Iterable[str] = (),
        environ: Mapping[str, str] | None = None,
    ) -> "PipelineConfig":
        environ = os.environ if environ is None else environ
        values = dict(DEFAULTS)
        path = config_path or environ.get(CONFIG_ENV)
        if path:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
            from_file = parse_config_text(text, str(path))
            _check_keys(from_file, str(path))
            values.update(from_file)
        from_env = env_overrides(environ)
        _check_keys(from_env, "environment")
        values.update(from_env)
        flags = {}
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            flags[key.strip().lower()] = value.strip()
        _check_keys(flags, "--set")
        values.update(flags)
        return cls(values)

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    def get_bool(self, key: str) -> bool:
        value = self.values[key].strip().lower()
        if value in _TRUE:
            return True
        if value in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {self.values[key]!r}")

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {self.values[key]!r}") from None

    def show(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.values.items()))

    def ontology(self) -> OntologyConfig:
        try:
            return OntologyConfig(
                base_iri=self["ontology.base_iri"],
                emit_owl_class_typing=self.get_bool("ontology.owl_class_typing"),
                restrictions=parse_restrictions(self["ontology.restrictions"]),
                causal_link_policy=self["ontology.causal_links"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def vaers_columns(self) -> VaersColumns:
        return VaersColumns(
            id_column=self["vaers.id_column"],
            symptom_columns=tuple(c.strip() for c in self["vaers.symptom_columns"].split(",") if c.strip()),
            vaccine_column=self["vaers.vaccine_column"],
            encoding=self["vaers.encoding"],
            fallback_encoding=self["vaers.fallback_encoding"],
        )

    def vocabulary(self) -> VocabularySet:
        directory = self["vocab.dir"]
        return VocabularySet.from_directory(directory) if directory else VocabularySet()
