import numpy as np

from tripartite.blocks import CouplingForm, ModelParams

FORMS = list(CouplingForm)


def random_params(rng, vacuum_emission=False) -> ModelParams:
    k = rng.uniform(0, 1, 2)
    return ModelParams(delta1=rng.uniform(-5, 5), delta2=rng.uniform(-5, 5),
                       chi1=rng.uniform(0, 10), chi2=rng.uniform(0, 10),
                       coupling=FORMS[rng.integers(len(FORMS))], kappa1=k[0], kappa2=k[1],
                       vacuum_emission=vacuum_emission)
