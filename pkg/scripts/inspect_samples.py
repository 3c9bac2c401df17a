import sys
from pathlib import Path

import numpy as np
import pandas as pd

from haar_fluctuations.montecarlo import load_samples


def finite_share(df: pd.DataFrame) -> float:
    """Percentual de linhas sem NaN nem ±inf."""
    values = df[["scaled_deviation_re", "scaled_deviation_im"]].to_numpy(dtype=float)
    return float(np.isfinite(values).all(axis=1).mean() * 100)


def inspect_samples(df: pd.DataFrame) -> None:
    """
    Imprime um resumo de um CSV de amostras gravado por ``simulate``.

    Args:
        df (pd.DataFrame): Amostras (sample_index, limit_label, scaled_deviation_re/im)
    """
    print(f"Shape: {df.shape}")

    print("\nAmostras por limite:\n" + df["limit_label"].astype("string").value_counts().to_string())

    stats = df.groupby("limit_label")[["scaled_deviation_re", "scaled_deviation_im"]]
    print(f"\nResumo:\n{stats.describe().T}")

    print(f"\nLinhas finitas: {finite_share(df):.2f}%")

    print(f"\nPrimeiras linhas:\n{df.head(10)}")


def main() -> None:
    if len(sys.argv) != 2:
        print("uso: python scripts/inspect_samples.py out/fig2_2_1_samples.csv")
        raise SystemExit(1)
    inspect_samples(load_samples(Path(sys.argv[1])))


if __name__ == "__main__":
    main()
