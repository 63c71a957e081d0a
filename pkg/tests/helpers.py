import numpy as np

from rotatest.models import ModelSpec, available_models, register_model


def flat_tail_model(cutoff=1.995, name=None):
    """Failure probability linear in theta below ``cutoff`` and free of theta
    above it, so a subgroup with every covariate past the cutoff has
    singular information.  With 96 single-trial subgroups and the default
    cutoff about a fifth of the replications contain such a subgroup."""
    name = name or f"flat_tail_{cutoff}"
    if name not in available_models():
        def prob(x, t):
            x = np.asarray(x)
            return 0.5 + 0.4 * t * (np.minimum(x, cutoff) - 1.0)

        def dprob(x, t):
            x = np.asarray(x)
            return np.where(x < cutoff, 0.4 * (x - 1.0), 0.0) + 0.0 * t

        register_model(ModelSpec(name, 0.5, (-1.0, 1.0), prob, dprob))
    return name
