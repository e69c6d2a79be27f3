"""Possibilistic AOI observation sequences from cursor trajectories, with HMM and CRF task recognition."""

__version__ = "0.1.0"

# versions of the on-disk formats that carry an explicit version field
FORMAT_VERSIONS = {
    "hmm-model": 1,
    "crf-model": 1,
    "classifier-bundle": 1,
    "dataset-manifest": 1,
    "run-manifest": 1,
}
