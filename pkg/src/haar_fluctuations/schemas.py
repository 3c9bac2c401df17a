"""
Schemas Pydantic para os arquivos de configuração e as saídas JSON da CLI.

Uma configuração (``RunConfig``) tem três blocos: ``model`` (tipo,
polinômio, alphas, betas, N), ``experiment`` (painéis com alvo, kappa,
amostras, semente) e ``output`` (diretório e histogramas). Os invariantes
de ``ModelSpec`` são checados durante a validação, antes de qualquer conta.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import BaseModel, BeforeValidator, Field, PlainSerializer, model_validator

from haar_fluctuations.model import ModelKind, ModelSpec
from haar_fluctuations.ncpoly import parse_polynomial
from haar_fluctuations.perturb import LimitSpectrum, limiting_eigenvalues


# NÚMEROS COMPLEXOS

def parse_complex(value: Any) -> complex:
    """Aceita número, ``"1+2j"``/``"1+2i"``, ``[re, im]`` ou ``{"re": .., "im": ..}``."""
    if isinstance(value, bool):
        raise ValueError("booleano não é um número complexo")
    if isinstance(value, (int, float, complex, np.number)):
        return complex(value)
    if isinstance(value, str):
        text = value.strip().replace(" ", "").replace("i", "j")
        try:
            return complex(text)
        except ValueError:
            raise ValueError(f"número complexo inválido: {value!r}") from None
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and value and set(value) <= {"re", "im"}:
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    raise ValueError(f"não é possível ler um número complexo de {value!r}")


def complex_to_json(value: complex) -> float | dict[str, float]:
    value = complex(value)
    if value.imag == 0:
        return value.real
    return {"re": value.real, "im": value.imag}


Complex = Annotated[complex, BeforeValidator(parse_complex), PlainSerializer(complex_to_json)]


def to_jsonable(obj: Any) -> Any:
    """Converte recursivamente complexos e tipos numpy em valores JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return complex_to_json(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# BLOCOS DE CONFIGURAÇÃO

class ModelBlock(BaseModel):
    """Bloco ``model``: define o ModelSpec."""
    kind: ModelKind = Field(..., description="GeneralTwoVar, Conjugation, SumConjugation ou Rotation")
    polynomial: str | None = Field(
        None,
        description="Polinômio não comutativo em x, y (ex: 'x + y + x*y*x')",
    )
    alphas: list[Complex] = Field(..., min_length=1, description="Autovalores não nulos de A")
    betas: list[Complex] = Field(default_factory=list, description="Autovalores não nulos de B")
    n: int = Field(400, ge=2, description="Dimensão N")

    model_config = {
        "json_schema_extra": {
            "example": {
                "kind": "Conjugation",
                "polynomial": "x + y + x*y*x + y*x*y",
                "alphas": [5, 2, 1],
                "betas": [4, 3, -1],
                "n": 400,
            }
        }
    }

    @model_validator(mode="after")
    def _check_spec(self) -> "ModelBlock":
        self.to_spec()
        return self

    def to_spec(self) -> ModelSpec:
        poly = parse_polynomial(self.polynomial) if self.polynomial is not None else None
        return ModelSpec(
            kind=self.kind,
            alphas=tuple(self.alphas),
            betas=tuple(self.betas),
            n=self.n,
            poly=poly,
        )


class PanelBlock(BaseModel):
    """Um painel: limite alvo, expoente e normalização."""
    label: str | None = Field(None, description="Nome do painel nos arquivos de saída")
    target: int | None = Field(None, ge=0, description="Índice do limite (base 0)")
    limit: Complex | None = Field(None, description="Valor do limite (alternativa a target)")
    rank: int = Field(1, ge=1, description="Posição dentro do cluster do limite (base 1)")
    kappa: float | Literal["auto"] = Field("auto", description="Expoente κ ou 'auto'")
    normalizer: Complex = Field(1.0, description="Divisor aplicado às amostras escaladas")
    threshold: float | None = Field(None, gt=0, description="Limiar do KS (padrão: 2x quantil de 1%)")
    channel: Literal["re", "im"] = Field("re", description="Parte testada de desvios complexos")

    @model_validator(mode="after")
    def _check_target(self) -> "PanelBlock":
        if (self.target is None) == (self.limit is None):
            raise ValueError("informe exatamente um entre 'target' e 'limit'")
        if self.kappa != "auto" and not self.kappa > 0:
            raise ValueError(f"kappa deve ser positivo, recebido {self.kappa}")
        if self.normalizer == 0:
            raise ValueError("normalizer deve ser não nulo")
        return self

    def resolve(self, limits: LimitSpectrum) -> int:
        """Índice do alvo em ``limits.values``."""
        if self.limit is not None:
            return limits.index_of(self.limit, self.rank)
        if self.target >= limits.dim:
            raise ValueError(f"target {self.target} fora do intervalo: há {limits.dim} limites")
        return self.target


_PANEL_KEYS = set(PanelBlock.model_fields)


class ExperimentBlock(BaseModel):
    """Bloco ``experiment``; a forma plana (sem ``panels``) vira um único painel."""
    samples: int = Field(2000, ge=1, description="Amostras por painel")
    seed: int | None = Field(None, ge=0, lt=2**64, description="Semente mestre (padrão: HAAR_SEED)")
    panels: list[PanelBlock] = Field(..., min_length=1)

    @model_validator(mode="before")
    @classmethod
    def _wrap_single_panel(cls, data: Any) -> Any:
        if isinstance(data, dict) and "panels" not in data:
            panel = {k: v for k, v in data.items() if k in _PANEL_KEYS}
            rest = {k: v for k, v in data.items() if k not in _PANEL_KEYS}
            rest["panels"] = [panel]
            return rest
        return data


class OutputBlock(BaseModel):
    """Bloco ``output``: destino dos arquivos e parâmetros dos histogramas."""
    directory: str | None = Field(None, description="Diretório de saída (padrão: HAAR_OUT_DIR)")
    bins: int | None = Field(None, ge=1, description="Número de bins (padrão: regra de Rice)")
    bin_width: float | None = Field(None, gt=0, description="Largura fixa dos bins")
    value_range: tuple[float, float] | None = Field(None, alias="range", description="Intervalo do histograma")
    table_points: int = Field(401, ge=2, description="Pontos da tabela de densidade")
    table_range: tuple[float, float] | None = Field(None, description="Intervalo da tabela de densidade")
    write_samples: bool = Field(True, description="Gravar o CSV de amostras")

    model_config = {"populate_by_name": True}

    @model_validator(mode="after")
    def _check_bins(self) -> "OutputBlock":
        if self.bins is not None and self.bin_width is not None:
            raise ValueError("use 'bins' ou 'bin_width', não ambos")
        for name, interval in (("range", self.value_range), ("table_range", self.table_range)):
            if interval is not None and not interval[0] < interval[1]:
                raise ValueError(f"{name} inválido: {interval}")
        return self


class RunConfig(BaseModel):
    """Arquivo de configuração completo (``configs/figN.json``)."""
    name: str = Field("run", description="Prefixo dos arquivos de saída")
    description: str | None = None
    model: ModelBlock
    experiment: ExperimentBlock
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _check_targets(self) -> "RunConfig":
        limits = limiting_eigenvalues(self.model.to_spec())
        for panel in self.experiment.panels:
            panel.resolve(limits)
        return self

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Configuração não encontrada: {path}")
        return cls.model_validate_json(path.read_text(encoding="utf-8"))


# SCHEMAS DE SAÍDA

class LimitEntry(BaseModel):
    index: int = Field(..., description="Índice (base 0)")
    label: str = Field(..., description="Rótulo 'limite#posição'")
    value: Complex
    multiplicity: int
    rank: int


class LimitsResponse(BaseModel):
    """Saída de ``limits``."""
    name: str
    kind: ModelKind
    n: int
    limits: list[LimitEntry]
    distinct: list[Complex]
    multiplicities: list[int]
    simple: bool


class LawResponse(BaseModel):
    """Saída de ``law`` para um painel."""
    label: str
    target: int
    limit: Complex
    law: dict[str, Any] = Field(..., description="Descrição da lei (describe())")
    table: str | None = Field(None, description="CSV da tabela de densidade, se gravado")


class ReportResponse(BaseModel):
    """Relatório de um painel de ``simulate``."""
    label: str
    target: int
    kappa: float
    samples: int
    seed: int
    ks_statistic: float | None = Field(None, description="Ausente quando não há lei para comparar")
    threshold: float | None = None
    method: Literal["one-sample", "two-sample"] | None = None
    verdict: Literal["pass", "fail", "untested"]
    runtime_seconds: float
    out_of_range: int
    law: dict[str, Any] | None = None
    files: dict[str, str] = Field(default_factory=dict)


class CriterionResponse(BaseModel):
    name: str
    passed: bool
    detail: str
    runtime_seconds: float


class VerifyResponse(BaseModel):
    """Saída de ``verify``."""
    passed: bool
    criteria: list[CriterionResponse]
