"""
Camada de serviço para os experimentos de flutuação.

Centraliza a lógica dos subcomandos da CLI (limites, leis, simulação e
re-histograma) a partir de uma ``RunConfig`` já validada. A CLI apenas
lê argumentos e imprime o JSON devolvido.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from haar_fluctuations import laws
from haar_fluctuations.config import Settings, get_settings
from haar_fluctuations.laws import FluctuationLaw, UnsupportedRegimeError, tabulate_law
from haar_fluctuations.montecarlo import (
    ExperimentConfig,
    ExperimentSamples,
    evaluate,
    histogram,
    load_samples,
    run_experiment,
    save_samples,
)
from haar_fluctuations.perturb import auto_grid, estimate_exponent, limiting_eigenvalues
from haar_fluctuations.randmat import RngStream
from haar_fluctuations.schemas import (
    LawResponse,
    LimitEntry,
    LimitsResponse,
    PanelBlock,
    ReportResponse,
    RunConfig,
    to_jsonable,
)

logger = logging.getLogger(__name__)

AUTO_SAMPLES_PER_N = 200
TABLE_QUANTILES = (0.005, 0.995)

# sub-streams reserved next to the per-sample streams 0..samples-1
_EXPONENT_STREAM = 1 << 21
_TABLE_STREAM = 1 << 22


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", label).strip("_")


@dataclass(frozen=True)
class PanelRun:
    """Painel com o alvo já resolvido em índice de ``limiting_eigenvalues``."""
    position: int
    label: str
    target: int
    panel: PanelBlock


class ExperimentService:
    """
    Executa uma configuração validada.

    Flags da CLI (seed, samples, out_dir, threads) têm precedência sobre a
    configuração, que por sua vez tem precedência sobre ``Settings``.
    """

    def __init__(
        self,
        config: RunConfig,
        *,
        seed: int | None = None,
        samples: int | None = None,
        out_dir: str | Path | None = None,
        threads: int | None = None,
        settings: Settings | None = None,
    ) -> None:
        settings = settings or get_settings()
        self.config = config
        self.seed = next(v for v in (seed, config.experiment.seed, settings.seed) if v is not None)
        self.samples = samples if samples is not None else config.experiment.samples
        self.out_dir = Path(next(v for v in (out_dir, config.output.directory, settings.out_dir) if v is not None))
        self.threads = threads if threads is not None else settings.threads
        if self.samples < 1:
            raise ValueError(f"samples deve ser positivo: {self.samples}")
        if self.threads < 1:
            raise ValueError(f"threads deve ser >= 1: {self.threads}")
        RngStream(int(self.seed))  # seed range check
        self.spec = config.model.to_spec()
        self.limits = limiting_eigenvalues(self.spec)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentService":
        return cls(RunConfig.from_file(path), **overrides)

    # ------------------------------------------------------------------
    # Painéis e leis
    # ------------------------------------------------------------------

    def panels(self) -> list[PanelRun]:
        runs = []
        for position, panel in enumerate(self.config.experiment.panels):
            target = panel.resolve(self.limits)
            label = panel.label or self.limits.label(target)
            runs.append(PanelRun(position=position, label=label, target=target, panel=panel))
        return runs

    def _file(self, run: PanelRun, suffix: str) -> Path:
        return self.out_dir / f"{self.config.name}_{_slug(run.label)}_{suffix}"

    def law(self, run: PanelRun) -> FluctuationLaw:
        return laws.law_for_target(self.spec, run.target)

    def kappa_for(self, run: PanelRun) -> float:
        """κ do painel; ``"auto"`` estima o expoente numa grade pequena."""
        if run.panel.kappa != "auto":
            return float(run.panel.kappa)
        grid = auto_grid(self.spec)
        estimate = estimate_exponent(
            self.spec,
            run.target,
            grid,
            AUTO_SAMPLES_PER_N,
            RngStream(self.seed).child(_EXPONENT_STREAM + run.position),
            n_jobs=self.threads,
        )
        kappa = estimate.as_kappa()
        logger.info(
            f"{run.label}: estimated kappa {estimate.kappa_hat:.3f} "
            f"(stderr {estimate.stderr:.3f}) on grid {grid} -> {kappa}"
        )
        return float(kappa)

    def _panel_law(self, run: PanelRun) -> FluctuationLaw:
        """Lei comparável às amostras: reescalada pelo normalizador, no canal do painel."""
        return self.law(run).rescaled(run.panel.normalizer).channel(run.panel.channel)

    def _overlay(self, law: FluctuationLaw):
        if law.has_closed_form:
            return law.density
        stream = RngStream(self.seed).child(_TABLE_STREAM)
        return lambda xs: tabulate_law(law, xs, stream)["f(x)"].to_numpy()

    def law_table(self, run: PanelRun) -> pd.DataFrame:
        """Tabela x, f(x), F(x) da lei do painel."""
        law = self._panel_law(run)
        stream = RngStream(self.seed).child(_TABLE_STREAM)
        output = self.config.output
        if output.table_range is not None:
            lo, hi = output.table_range
        else:
            draws = np.asarray(law.sample(stream, 4000), dtype=float)
            lo, hi = np.quantile(draws, TABLE_QUANTILES)
            pad = 0.1 * (hi - lo) if hi > lo else 1.0
            lo, hi = lo - pad, hi + pad
        xs = np.linspace(lo, hi, output.table_points)
        return tabulate_law(law, xs, stream)

    # ------------------------------------------------------------------
    # Operações
    # ------------------------------------------------------------------

    def limits_response(self) -> LimitsResponse:
        entries = [
            LimitEntry(
                index=i,
                label=self.limits.label(i),
                value=value,
                multiplicity=len(self.limits.cluster_of(i)),
                rank=self.limits.rank_of(i),
            )
            for i, value in enumerate(self.limits.values)
        ]
        return LimitsResponse(
            name=self.config.name,
            kind=self.spec.kind,
            n=self.spec.n,
            limits=entries,
            distinct=list(self.limits.distinct),
            multiplicities=list(self.limits.multiplicities),
            simple=self.limits.simple,
        )

    def law_responses(self, write_tables: bool = False) -> list[LawResponse]:
        out = []
        for run in self.panels():
            law = self.law(run)
            table_path = None
            if write_tables:
                table_path = self._file(run, "law.csv")
                table_path.parent.mkdir(parents=True, exist_ok=True)
                self.law_table(run).to_csv(table_path, index=False)
                logger.info(f"Law table written to {table_path}")
            out.append(
                LawResponse(
                    label=run.label,
                    target=run.target,
                    limit=self.limits.values[run.target],
                    law=to_jsonable(law.describe()),
                    table=str(table_path) if table_path is not None else None,
                )
            )
        return out

    def simulate(self) -> list[ReportResponse]:
        """Roda todos os painéis sobre as mesmas amostras e grava CSV/JSON."""
        runs = self.panels()
        first = runs[0]
        kappas = {run.position: self.kappa_for(run) for run in runs}
        base = run_experiment(
            ExperimentConfig(
                spec=self.spec,
                target=first.target,
                kappa=kappas[first.position],
                num_samples=self.samples,
                seed=self.seed,
                normalizer=first.panel.normalizer,
            ),
            n_jobs=self.threads,
        )
        self.out_dir.mkdir(parents=True, exist_ok=True)
        reports = []
        for run in runs:
            samples = base.retarget(run.target, kappas[run.position], run.panel.normalizer)
            reports.append(self._report(run, samples))
        return reports

    def _report(self, run: PanelRun, samples: ExperimentSamples) -> ReportResponse:
        output = self.config.output
        files: dict[str, str] = {}
        if output.write_samples:
            files["samples"] = str(save_samples(samples, self._file(run, "samples.csv")))

        try:
            law = self.law(run)
        except UnsupportedRegimeError as exc:
            logger.warning(f"{run.label}: {exc}; writing samples and histogram without a KS verdict")
            law = None

        if law is None:
            hist = histogram(
                samples.channel(run.panel.channel),
                bins=output.bins,
                bin_width=output.bin_width,
                value_range=output.value_range,
            )
            hist.to_frame().to_csv(self._file(run, "histogram.csv"), index=False)
            response = ReportResponse(
                label=run.label,
                target=run.target,
                kappa=samples.config.kappa,
                samples=self.samples,
                seed=self.seed,
                verdict="untested",
                runtime_seconds=samples.runtime,
                out_of_range=hist.out_of_range,
            )
        else:
            report = evaluate(
                samples,
                law,
                threshold=run.panel.threshold,
                channel=run.panel.channel,
                bins=output.bins,
                bin_width=output.bin_width,
                value_range=output.value_range,
            )
            overlay = self._overlay(self._panel_law(run))
            report.histogram.to_frame(overlay).to_csv(self._file(run, "histogram.csv"), index=False)
            response = ReportResponse(
                label=run.label,
                target=run.target,
                kappa=samples.config.kappa,
                samples=self.samples,
                seed=self.seed,
                ks_statistic=report.ks_statistic,
                threshold=report.threshold,
                method=report.method,
                verdict=report.verdict,
                runtime_seconds=report.runtime,
                out_of_range=report.histogram.out_of_range,
                law=to_jsonable(report.law),
            )

        files["histogram"] = str(self._file(run, "histogram.csv"))
        files["report"] = str(self._file(run, "report.json"))
        response = response.model_copy(update={"files": files})
        Path(files["report"]).write_text(response.model_dump_json(indent=2), encoding="utf-8")
        return response

    def rehistogram(self, samples_path: str | Path) -> dict[str, str]:
        """Re-bina um CSV de amostras com o bloco ``output`` atual.

        Cada ``limit_label`` do CSV é comparado aos painéis da configuração
        para escolher canal e curva teórica; rótulos sem painel saem sem
        a coluna ``theory``.
        """
        samples_path = Path(samples_path)
        if not samples_path.exists():
            raise FileNotFoundError(f"Amostras não encontradas: {samples_path}")
        frame = load_samples(samples_path)
        by_label = {self.limits.label(run.target): run for run in self.panels()}
        output = self.config.output
        self.out_dir.mkdir(parents=True, exist_ok=True)

        written = {}
        for label, group in frame.groupby("limit_label", sort=False):
            run = by_label.get(str(label))
            column = "scaled_deviation_im" if run is not None and run.panel.channel == "im" else "scaled_deviation_re"
            hist = histogram(
                group[column].to_numpy(),
                bins=output.bins,
                bin_width=output.bin_width,
                value_range=output.value_range,
            )
            overlay = None
            if run is not None:
                try:
                    overlay = self._overlay(self._panel_law(run))
                except UnsupportedRegimeError:
                    logger.warning(f"{label}: no law to overlay")
            path = self.out_dir / f"{samples_path.stem}_{_slug(str(label))}_rebinned.csv"
            hist.to_frame(overlay).to_csv(path, index=False)
            logger.info(f"Histogram of {len(group)} samples ({label}) written to {path}")
            written[str(label)] = str(path)
        return written


# ACESSO

def load_service(config_path: str | Path, **overrides) -> ExperimentService:
    """Cria o serviço a partir de um arquivo de configuração."""
    logger.info(f"Loading run configuration {config_path}")
    return ExperimentService.from_file(config_path, **overrides)


def dump_json(payload) -> str:
    """JSON estável (chaves na ordem dos schemas, indentação 2)."""
    if hasattr(payload, "model_dump"):
        return payload.model_dump_json(indent=2)
    return json.dumps(
        [p.model_dump(mode="json") if hasattr(p, "model_dump") else p for p in payload],
        indent=2,
    )
