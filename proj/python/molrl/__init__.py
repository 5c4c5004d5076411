"""Text-based molecular design: grammars, oracles, policies, RL, evaluation."""

from ._core import (
    Oracle,
    OracleLedger,
    Policy,
    augmented_docking_reward,
    canonical_smiles,
    fingerprint_bits,
    heavy_atom_count,
    ingest_corpus,
    molecular_formula,
    optimize,
    parse_smiles_ok,
    pretrain,
    qed_lite,
    run_metrics,
    sa_lite,
    selfies_alphabet,
    selfies_decode,
    selfies_encode,
    smiles_tokens,
    tanimoto,
)

__all__ = [
    "Oracle",
    "OracleLedger",
    "Policy",
    "augmented_docking_reward",
    "canonical_smiles",
    "fingerprint_bits",
    "heavy_atom_count",
    "ingest_corpus",
    "molecular_formula",
    "optimize",
    "parse_smiles_ok",
    "pretrain",
    "qed_lite",
    "run_metrics",
    "sa_lite",
    "selfies_alphabet",
    "selfies_decode",
    "selfies_encode",
    "smiles_tokens",
    "tanimoto",
]
