import pytest

from orgminer.dataset import AttributeSpec, Codebook, Dataset
from orgminer.synth import SynthSpec, generate


def make_dataset(columns: dict, kinds: dict | None = None) -> Dataset:
    """Dataset from {name: values}; categories are inferred in sorted order."""
    kinds = kinds or {}
    specs = []
    for name, values in columns.items():
        kind = kinds.get(name, "categorical")
        if kind == "numeric":
            specs.append(AttributeSpec(name, "numeric"))
        else:
            cats = sorted({v for v in values if isinstance(v, str)})
            while len(cats) < 2:
                cats.append(f"_unused{len(cats)}")
            specs.append(AttributeSpec(name, kind, tuple(cats)))
    rows = tuple(zip(*columns.values()))
    return Dataset(Codebook(tuple(specs)), rows)


@pytest.fixture(scope="session")
def planted():
    return generate(SynthSpec())


SMALL_SPEC = SynthSpec(n_rows=90, n_groups=3, seed=1)
SMALL_CONFIG = {"cluster": {"k_range": [2, 5], "restarts": 3}, "trees": {"folds": 3}}


@pytest.fixture(scope="session")
def small_inputs(tmp_path_factory):
    from orgminer.synth import write_synthetic

    return write_synthetic(SMALL_SPEC, tmp_path_factory.mktemp("small_synth"))


@pytest.fixture(scope="session")
def small_bundle(small_inputs, tmp_path_factory):
    from orgminer.pipeline import PipelineConfig, run_pipeline

    out = tmp_path_factory.mktemp("small_bundle")
    config = PipelineConfig.from_dict(
        {**SMALL_CONFIG, "data": str(small_inputs["data"]), "codebook": str(small_inputs["codebook"]), "out": str(out)}
    )
    return run_pipeline(config)
