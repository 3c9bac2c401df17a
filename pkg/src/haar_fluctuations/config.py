"""
Configuração do projeto: caminhos padrão e variáveis de ambiente.

Valores lidos de um ``.env`` opcional (python-dotenv) e das variáveis
``HAAR_SEED``, ``HAAR_THREADS``, ``HAAR_OUT_DIR`` e ``HAAR_LOG_LEVEL``.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv

DEFAULT_SEED = 20240607
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass(frozen=True) # immutable
class Paths:
    configs_dir: Path = Path("configs")
    default_out_dir: Path = Path("out")

    def figure_config(self, name: str) -> Path:
        """Caminho de um dos arquivos ``configs/figN.json``."""
        return self.configs_dir / f"{name}.json"


@dataclass(frozen=True)
class Settings:
    """Padrões de execução; flags da CLI têm precedência sobre eles."""
    seed: int = DEFAULT_SEED
    threads: int = 1
    out_dir: Path = Paths().default_out_dir
    log_level: str = "INFO"

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"HAAR_SEED deve ser um inteiro de 64 bits sem sinal: {self.seed}")
        if self.threads < 1:
            raise ValueError(f"HAAR_THREADS deve ser >= 1: {self.threads}")
        if logging.getLevelName(self.log_level) == f"Level {self.log_level}":
            raise ValueError(f"HAAR_LOG_LEVEL desconhecido: {self.log_level}")

    @classmethod
    def from_env(cls) -> "Settings":
        load_dotenv()
        try:
            seed = int(os.getenv("HAAR_SEED", str(DEFAULT_SEED)))
            threads = int(os.getenv("HAAR_THREADS", "1"))
        except ValueError as exc:
            raise ValueError(f"Variável de ambiente inválida: {exc}") from exc
        return cls(
            seed=seed,
            threads=threads,
            out_dir=Path(os.getenv("HAAR_OUT_DIR", str(Paths().default_out_dir))),
            log_level=os.getenv("HAAR_LOG_LEVEL", "INFO").upper(),
        )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Settings do ambiente atual (cache; use ``get_settings.cache_clear()`` em testes)."""
    return Settings.from_env()
