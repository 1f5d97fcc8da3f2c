#
# Copyright (C) 2024-2026 The covap-sim developers
#
# This file is part of covap-sim.
#
# covap-sim is free software; you can redistribute it and/or
# modify it under the terms of the GNU Lesser General Public
# License as published by the Free Software Foundation; either
# version 2.1 of the License, or (at your option) any later version.
#
# covap-sim is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU
# Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public
# License along with covap-sim; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA 02110-1301 USA

"""
Desk-scale data-parallel trainer.

P logical workers train a toy model on contiguous shards of a synthetic
dataset. Each step, every worker computes its local gradient, runs it
through its own compressor and error feedback state, and the compressed
updates are averaged by a fixed-order allreduce before a plain SGD step.
Parameters are checked to stay bit-identical on all workers.

Parameter vectors are flat and laid out in backward order so that the
effective tensors of a :class:`CovapSim.Topology.BucketPlan` map to
contiguous slices.
"""

from concurrent.futures import ThreadPoolExecutor
import logging

import numpy

from CovapSim.Baseline import BaselineConfig, new_compressor
from CovapSim.Compressor import CompressedUpdate, CovapConfig, \
    ErrorFeedback, covap_decompress, split_flat
from CovapSim.Defaults import DEFAULTS
from CovapSim.Topology import LayerSpec, ModelSpec, allocate_buckets, \
    shard_plan


LOGGER = logging.getLogger(__name__)

LINEAR_REGRESSION = 'linear-regression'
LOGISTIC_REGRESSION = 'logistic-regression'
TWO_LAYER_MLP = 'two-layer-mlp'
MODEL_KINDS = (LINEAR_REGRESSION, LOGISTIC_REGRESSION, TWO_LAYER_MLP)


class TrainerError(Exception):
    """Base trainer error."""

class TrainerInputError(TrainerError):
    """Raised on inconsistent trainer inputs."""

class DivergenceError(TrainerError):
    """Raised by callers when a run diverged."""

class ReplicaMismatchError(TrainerError):
    """Raised when workers end a step with different parameters."""


#
# Toy models
#
class ToyModel(object):
    """
    Base toy model: a flat parameter vector of `dim` reals split into
    `layer_sizes` (backward order), a scalar loss and its gradient.
    """

    kind = None

    def __init__(self, dim, layer_sizes=None, layers=8):
        self.dim = dim
        if layer_sizes is None:
            layer_sizes = [len(part) for part in
                           numpy.array_split(numpy.arange(dim),
                                             min(layers, dim))]
        if sum(layer_sizes) != dim or min(layer_sizes) < 1:
            raise TrainerInputError("layer sizes %r do not partition %d "
                                    "parameters" % (layer_sizes, dim))
        self.layer_sizes = list(layer_sizes)

    def init_params(self, rng):
        return numpy.zeros(self.dim)

    def loss(self, params, features, targets):
        raise NotImplementedError("Derived classes must implement.")

    def gradient(self, params, features, targets):
        raise NotImplementedError("Derived classes must implement.")

    def model_spec(self):
        """Return the ModelSpec of the synthetic layers."""
        return ModelSpec([LayerSpec("layer%d" % idx, size)
                          for idx, size in enumerate(self.layer_sizes)],
                         name=self.kind)


class LinearRegression(ToyModel):
    """Least squares, loss = mean((Xw - y)^2) / 2."""

    kind = LINEAR_REGRESSION

    def loss(self, params, features, targets):
        residual = features.dot(params) - targets
        return 0.5 * float(residual.dot(residual)) / targets.shape[0]

    def gradient(self, params, features, targets):
        residual = features.dot(params) - targets
        return features.T.dot(residual) / targets.shape[0]


class LogisticRegression(ToyModel):
    """Binary logistic regression, labels in {0, 1}, mean log-loss."""

    kind = LOGISTIC_REGRESSION

    def loss(self, params, features, targets):
        logits = features.dot(params)
        return float(numpy.mean(numpy.logaddexp(0.0, logits) -
                                targets * logits))

    def gradient(self, params, features, targets):
        logits = features.dot(params)
        probs = 0.5 * (1.0 + numpy.tanh(0.5 * logits))
        return features.T.dot(probs - targets) / targets.shape[0]


class TwoLayerMLP(ToyModel):
    """
    One tanh hidden layer and a linear output, squared loss. Parameters
    are laid out in backward order: w2 (hidden), b2 (1), W1 (hidden x
    inputs, row major), b1 (hidden).
    """

    kind = TWO_LAYER_MLP

    def __init__(self, inputs, hidden, layer_sizes=None):
        self.inputs = inputs
        self.hidden = hidden
        dim = hidden + 1 + hidden * inputs + hidden
        if layer_sizes is None:
            layer_sizes = [hidden + 1, hidden * inputs + hidden]
        ToyModel.__init__(self, dim, layer_sizes)

    def _unpack(self, params):
        hid, inp = self.hidden, self.inputs
        w2 = params[:hid]
        b2 = params[hid]
        w1 = params[hid + 1:hid + 1 + hid * inp].reshape(hid, inp)
        b1 = params[hid + 1 + hid * inp:]
        return w2, b2, w1, b1

    def init_params(self, rng):
        params = numpy.zeros(self.dim)
        hid, inp = self.hidden, self.inputs
        params[:hid] = rng.standard_normal(hid) / numpy.sqrt(hid)
        params[hid + 1:hid + 1 + hid * inp] = \
            rng.standard_normal(hid * inp) / numpy.sqrt(inp)
        return params

    def _forward(self, params, features):
        w2, b2, w1, b1 = self._unpack(params)
        hidden = numpy.tanh(features.dot(w1.T) + b1)
        return hidden, hidden.dot(w2) + b2

    def loss(self, params, features, targets):
        _, output = self._forward(params, features)
        residual = output - targets
        return 0.5 * float(residual.dot(residual)) / targets.shape[0]

    def gradient(self, params, features, targets):
        w2, _, _, _ = self._unpack(params)
        hidden, output = self._forward(params, features)
        count = targets.shape[0]
        residual = (output - targets) / count
        grad_hidden = numpy.outer(residual, w2) * (1.0 - hidden ** 2)
        return numpy.concatenate([hidden.T.dot(residual),
                                  [residual.sum()],
                                  grad_hidden.T.dot(features).ravel(),
                                  grad_hidden.sum(axis=0)])


def new_model(kind, features, hidden=16, layer_sizes=None, layers=8):
    """Return a ToyModel of `kind` for inputs of `features` values."""
    if kind == LINEAR_REGRESSION:
        return LinearRegression(features, layer_sizes, layers)
    if kind == LOGISTIC_REGRESSION:
        return LogisticRegression(features, layer_sizes, layers)
    if kind == TWO_LAYER_MLP:
        return TwoLayerMLP(features, hidden, layer_sizes)
    raise TrainerInputError("unknown model kind %r" % kind)


class Dataset(object):
    """Synthetic features and targets, split contiguously over workers."""

    def __init__(self, features, targets):
        if features.shape[0] != targets.shape[0]:
            raise TrainerInputError("features and targets differ in length")
        self.features = features
        self.targets = targets

    def __len__(self):
        return self.targets.shape[0]

    def shards(self, workers):
        if workers > len(self):
            raise TrainerInputError("%d samples for %d workers"
                                    % (len(self), workers))
        return [Dataset(feat, targ) for feat, targ in
                zip(numpy.array_split(self.features, workers),
                    numpy.array_split(self.targets, workers))]


def make_dataset(kind, samples, features, seed=0, noise=1.0):
    """Return a seeded synthetic Dataset suited to model `kind`."""
    rng = numpy.random.default_rng(seed)
    inputs = rng.standard_normal((samples, features))
    truth = rng.standard_normal(features) / numpy.sqrt(features)
    if kind == LINEAR_REGRESSION:
        targets = inputs.dot(truth) + noise * rng.standard_normal(samples)
    elif kind == LOGISTIC_REGRESSION:
        probs = 1.0 / (1.0 + numpy.exp(-4.0 * inputs.dot(truth)))
        targets = (rng.random(samples) < probs).astype(numpy.float64)
    elif kind == TWO_LAYER_MLP:
        targets = numpy.sin(2.0 * inputs.dot(truth)) + \
            0.1 * noise * rng.standard_normal(samples)
    else:
        raise TrainerInputError("unknown model kind %r" % kind)
    return Dataset(inputs, targets)


#
# Optimizer, compressors and reduction
#
class SGD(object):
    """Plain SGD with a fixed learning rate."""

    def __init__(self, lr):
        if lr <= 0:
            raise TrainerInputError("learning rate must be > 0")
        self.lr = lr

    def apply(self, params, update):
        params -= self.lr * update


class CompressorSpec(object):
    """
    Compressor of a training run: scheme, COVAP settings, sparsifier
    fraction, Random-k seed and error feedback switch for baselines.
    """

    def __init__(self, scheme='none', covap=None, k_fraction=None, seed=0,
                 ef_enabled=True):
        if scheme == 'covap' and covap is None:
            covap = CovapConfig()
        self.baseline = None
        if scheme not in ('none', 'covap'):
            self.baseline = BaselineConfig(scheme, k_fraction, seed,
                                           ef_enabled)
        self.scheme = scheme
        self.covap = covap
        self.k_fraction = k_fraction
        self.seed = seed
        self.ef_enabled = ef_enabled

    @property
    def interval(self):
        return self.covap.interval if self.scheme == 'covap' else 1

    def coefficient(self):
        """Return the compensation coefficient function or None."""
        if self.scheme == 'covap':
            return self.covap.coefficient if self.covap.ef_enabled else None
        if self.scheme == 'none' or not self.ef_enabled:
            return None
        return lambda step: 1.0

    def build(self):
        return new_compressor(self.scheme, self.covap, self.k_fraction,
                              self.seed)


def allreduce_mean(vectors):
    """
    Return the element-wise mean of `vectors`, accumulated in list order
    so the result does not depend on how workers were scheduled.
    """
    vectors = list(vectors)
    if not vectors:
        raise TrainerInputError("allreduce of no vector")
    acc = numpy.array(vectors[0], dtype=numpy.float64, copy=True)
    for vec in vectors[1:]:
        if numpy.shape(vec) != acc.shape:
            raise TrainerInputError("allreduce length mismatch: %s != %s"
                                    % (numpy.shape(vec), acc.shape))
        acc += vec
    acc /= len(vectors)
    return acc


class TrainRun(object):
    """Record of a training run."""

    def __init__(self, scheme, interval, numels):
        self.scheme = scheme
        self.interval = interval
        self.numels = list(numels)
        self.losses = []
        self.bytes = []
        self.energies = []
        self.selected = []
        self.ratios = []
        self.params = None
        self.diverged = False

    @property
    def final_loss(self):
        return self.losses[-1] if self.losses else None

    def rows(self):
        """Return (step, loss, bytes) rows."""
        return [(step, loss, nbytes) for step, (loss, nbytes)
                in enumerate(zip(self.losses, self.bytes))]

    def summary(self):
        return {"scheme": self.scheme, "interval": self.interval,
                "steps": len(self.losses), "final_loss": self.final_loss,
                "total_bytes": sum(self.bytes), "diverged": self.diverged,
                "effective_tensors": len(self.numels)}


def training_plan(model, interval=1, cap_bytes=None):
    """
    Return the BucketPlan of `model`'s synthetic layers. The default
    capacity is the size of the largest layer but one, so that most
    layers get their own bucket and one oversized layer gets sharded.
    """
    spec = model.model_spec()
    if cap_bytes is None:
        sizes = sorted(layer.nbytes for layer in spec.layers)
        cap_bytes = sizes[-2] if len(sizes) > 1 else sizes[0]
    return shard_plan(allocate_buckets(spec, cap_bytes), interval)


def _local_step(worker, model, params, shard, feedback, offsets, step,
                batch_size, seed, results):
    features, targets = shard.features, shard.targets
    if batch_size:
        rng = numpy.random.default_rng([seed, worker, step])
        rows = rng.choice(targets.shape[0], size=batch_size, replace=False)
        features, targets = features[rows], targets[rows]
    grad = model.gradient(params, features, targets)
    results[worker] = feedback.step(split_flat(grad, offsets))


def train(model, data, optimizer, compressor, steps, workers=4, seed=0,
          batch_size=None, plan=None, threaded=None, log_every=None):
    """
    Train `model` on `data` with `workers` data-parallel workers for
    `steps` SGD steps. Return a TrainRun.
    """
    if threaded is None:
        threaded = DEFAULTS.threaded
    if log_every is None:
        log_every = DEFAULTS.log_every
    if steps < 0:
        raise TrainerInputError("negative step count")
    if plan is None:
        plan = training_plan(model, compressor.interval)
    offsets = plan.offsets()
    numels = plan.numels()
    if offsets[-1][1] != model.dim:
        raise TrainerInputError("plan covers %d parameters, model has %d"
                                % (offsets[-1][1], model.dim))
    shards = data.shards(workers)
    init = model.init_params(numpy.random.default_rng(seed))
    replicas = [init.copy() for _ in range(workers)]
    compressors = [compressor.build() for _ in range(workers)]
    feedbacks = [ErrorFeedback(comp, numels, compressor.coefficient())
                 for comp in compressors]
    run = TrainRun(compressor.scheme, compressor.interval, numels)

    for step in range(steps):
        results = [None] * workers
        args = [(worker, model, replicas[worker], shards[worker],
                 feedbacks[worker], offsets, step, batch_size, seed, results)
                for worker in range(workers)]
        if threaded:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                futures = [executor.submit(_local_step, *arg)
                           for arg in args]
            # re-raise the first worker failure in worker order
            for future in futures:
                future.result()
        else:
            for arg in args:
                _local_step(*arg)

        if compressor.scheme == 'covap':
            head = results[0]
            payload = dict((idx, allreduce_mean([res.payload[idx]
                                                 for res in results]))
                           for idx in sorted(head.selected_indices))
            mean = numpy.concatenate(covap_decompress(
                CompressedUpdate(head.selected_indices, payload, step,
                                 numels)))
            selected = head.selected_indices
        else:
            mean = allreduce_mean([numpy.concatenate(comp.decompress(res))
                                   for comp, res in zip(compressors,
                                                        results)])
            selected = None

        for params in replicas:
            optimizer.apply(params, mean)
        for worker in range(1, workers):
            if not numpy.array_equal(replicas[0], replicas[worker],
                                     equal_nan=True):
                raise ReplicaMismatchError("worker %d parameters differ "
                                           "from worker 0 after step %d"
                                           % (worker, step))

        _record(run, feedbacks[0], compressors[0], results[0], selected)
        loss = model.loss(replicas[0], data.features, data.targets)
        run.losses.append(loss)
        if not numpy.isfinite(loss):
            run.diverged = True
            LOGGER.warning("run diverged at step %d (loss %r)", step, loss)
            break
        if log_every and (step + 1) % log_every == 0:
            LOGGER.info("%s step %d: loss %.6g", compressor.scheme, step + 1,
                        loss)

    run.params = replicas[0]
    return run


def _record(run, feedback, compressor, update, selected):
    corrected = feedback.last_corrected
    energies = numpy.array([float(vec.dot(vec)) for vec in corrected])
    restored = compressor.decompress(update)
    total = energies.sum()
    lost = sum(float((corr - rest).dot(corr - rest))
               for corr, rest in zip(corrected, restored))
    run.energies.append(energies)
    run.selected.append(selected)
    run.ratios.append(lost / total if total > 0 else 0.0)
    run.bytes.append(compressor.payload_bytes(update))


class ContractionAudit(object):
    """Observed compression error ratios of a training run."""

    def __init__(self, interval, ratios, window_means, window_bounds):
        self.interval = interval
        self.ratios = ratios
        self.window_means = window_means
        self.window_bounds = window_bounds
        self.expected = 1.0 - 1.0 / interval

    @property
    def max_ratio(self):
        return max(self.ratios) if self.ratios else 0.0

    @property
    def deviation(self):
        """Largest distance between a window mean and 1 - 1/I."""
        return max([abs(mean - self.expected) for mean in self.window_means]
                   or [0.0])

    def as_dict(self):
        return {"interval": self.interval, "expected": self.expected,
                "max_ratio": self.max_ratio,
                "deviation": self.deviation,
                "window_means": list(self.window_means),
                "window_bounds": list(self.window_bounds)}


def _kept_bound(energies, selected):
    """1 - smallest energy fraction among the kept tensors of a step."""
    total = energies.sum()
    if selected is None or total == 0 or not selected:
        return 1.0
    return 1.0 - min(energies[idx] for idx in selected) / total


def contraction_audit(run):
    """
    Audit |x - C(x)|^2 / |x|^2 over `run`, x being the error corrected
    gradient of worker 0. Observed ratios are averaged over consecutive
    windows of I steps. When x does not change within a window, every
    tensor is kept exactly once and the window mean is 1 - 1/I; otherwise
    each ratio stays below 1 minus the smallest energy fraction among the
    tensors kept at that step, and window_bounds hold the largest such
    bound of each window.
    """
    interval = run.interval
    window_means = []
    window_bounds = []
    for pos in range(0, len(run.ratios) - interval + 1, interval):
        window = run.ratios[pos:pos + interval]
        window_means.append(sum(window) / len(window))
        window_bounds.append(max(
            _kept_bound(run.energies[step], run.selected[step])
            for step in range(pos, pos + interval)))
    return ContractionAudit(interval, list(run.ratios), window_means,
                            window_bounds)
