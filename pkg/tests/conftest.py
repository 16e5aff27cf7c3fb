import pytest

from hvdsom.config import ExperimentConfig
from hvdsom.featcache import extract_all, load_features
from hvdsom.features import FrameSpec
from hvdsom.synth import CorpusSpec, generate_corpus


def small_config(**kw) -> ExperimentConfig:
    """Tiny maps and short training so a full CV run takes seconds."""
    defaults = dict(base_rows=6, base_cols=6, sub_rows=4, sub_cols=4, steps_per_sample=3, k=3, seed=1)
    defaults.update(kw)
    return ExperimentConfig(**defaults)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Four speakers, one token per word: 18 unlabelled and 54 annotated files."""
    root = tmp_path_factory.mktemp("corpus")
    manifest = generate_corpus(CorpusSpec(speakers=4, tokens_per_word=1, seed=3, overlap_factor=0.5), root)
    computed, failures = extract_all(manifest, FrameSpec(), root / "features")
    assert not failures and computed == len(manifest.utterances)
    return manifest, load_features(manifest, root / "features")
