"""Human activity recognition on UCI HAR: loaders, classical and recurrent models, t-SNE."""

import json

from ._harpy import (
    Dataset,
    HarError,
    Split,
    __version__,
    activity_code,
    activity_name,
    confusion,
    count_params,
    default_params,
    evaluate,
    load_dataset,
    make_synthetic,
    train,
    tsne,
    verify,
    write_uci_layout,
)

MODELS = ("logreg", "linearsvm", "rbfsvm", "tree", "rnn", "lstm", "bilstm", "gru")


def report(outcome):
    """Parsed report dict from the result of train()."""
    return json.loads(outcome["report"])
