"""Full-budget toy checkpoints shared by the slow tests, cached by config digest."""
import os

import numpy as np

from dppflow.cfm import FlowPathSpec, TrainConfig, cached_checkpoint_path, default_target, train_cached

CACHE = os.environ.get("DPPFLOW_CACHE", os.path.join(os.path.dirname(os.path.dirname(__file__)), ".cache"))


def toy_config():
    return TrainConfig(target=default_target())


def trained(formulation):
    return train_cached(FlowPathSpec(formulation), toy_config(), CACHE)


def training_losses(formulation):
    trained(formulation)
    path = cached_checkpoint_path(CACHE, FlowPathSpec(formulation), toy_config())[:-5] + "-log.csv"
    return np.loadtxt(path, delimiter=",", skiprows=1, usecols=1)


def bimodal_target():
    """Two modes sharing x = 0, so observing x leaves a two-way choice in y."""
    from dppflow.gmm import GmmSpec

    return GmmSpec(np.array([[0.0, 2.5], [0.0, -2.5]]), np.array([0.3, 0.3]), np.array([0.75, 0.25]))


def bimodal_config():
    return TrainConfig(target=bimodal_target(), steps=4000, hidden=64, layers=3)


def trained_bimodal():
    return train_cached(FlowPathSpec("MB-OT"), bimodal_config(), CACHE)
