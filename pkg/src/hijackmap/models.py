"""Architecture catalog and builders for the three compared model families.

Family grids:

* ``cnn``        variants 1..3, that many conv/pool blocks over the TF-IDF
                 vector read as a length-V single-channel signal
* ``mlfnn``      variants 2..4 total dense layers
* ``tinyformer`` a from-scratch 2-layer transformer encoder, one variant
                 per learning rate in {2e-5, 3e-5, 4e-5, 5e-5}

Ids serialize as strings such as ``cnn-2`` or ``tinyformer-2e-5`` and are
used in checkpoints, CLI flags, and reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hijackmap.nnkit.checkpoint import CheckpointData, load_checkpoint, save_checkpoint
from hijackmap.nnkit.layers import (
    AddChannel,
    Conv1d,
    Dense,
    Embedding,
    EncoderBlock,
    Flatten,
    MaxPool1d,
    Network,
    SelectFirst,
)

HIDDEN_WIDTH = 64
CONV_FILTERS = 32
KERNEL_WIDTH = 5
POOL_WINDOW = 2
POOL_STRIDE = 2
D_MODEL = 32
HEADS = 4
ENCODER_DEPTH = 2
FF_WIDTH = 64
MAX_LEN = 48

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
RESERVED_TOKENS = 3

FAMILIES = ("cnn", "mlfnn", "tinyformer")
_VARIANTS = {
    "cnn": ("1", "2", "3"),
    "mlfnn": ("2", "3", "4"),
    "tinyformer": ("2e-5", "3e-5", "4e-5", "5e-5"),
}


@dataclass(frozen=True)
class ArchitectureId:
    family: str
    variant: str

    def __post_init__(self):
        if self.family not in _VARIANTS:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.variant not in _VARIANTS[self.family]:
            raise ValueError(f"unknown {self.family} variant {self.variant!r}")

    def __str__(self) -> str:
        return f"{self.family}-{self.variant}"

    @property
    def depth(self) -> int:
        """Block count for cnn, total dense layers for mlfnn."""
        if self.family == "tinyformer":
            raise ValueError("tinyformer variants are learning rates, not depths")
        return int(self.variant)

    @property
    def learning_rate(self) -> float:
        """Adam step size: the variant itself for tinyformer, else 0.001."""
        if self.family == "tinyformer":
            return float(self.variant)
        return 0.001


def parse_architecture_id(text: str) -> ArchitectureId:
    family, sep, variant = text.partition("-")
    if not sep:
        raise ValueError(f"malformed architecture id {text!r}")
    return ArchitectureId(family=family, variant=variant)


def catalog(family: str) -> list[ArchitectureId]:
    if family not in _VARIANTS:
        raise ValueError(f"unknown model family {family!r}")
    return [ArchitectureId(family, v) for v in _VARIANTS[family]]


class ModelInstance:
    """An architecture id bound to its parameter tensors and forward graph."""

    def __init__(self, arch: ArchitectureId, network: Network, input_contract: str):
        self.arch = arch
        self.network = network
        self.input_contract = input_contract
        self.adam_steps = 0

    @property
    def input_kind(self) -> str:
        return self.input_contract.split(":", 1)[0]

    @property
    def input_dim(self) -> int:
        return int(self.input_contract.split(":", 1)[1])

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Probabilities for a batch of featurized inputs."""
        return self.network.forward(np.asarray(x)).ravel()

    def parameters(self) -> dict[str, np.ndarray]:
        return self.network.parameters()

    def layer_kinds(self) -> list[str]:
        return [type(layer).__name__ for layer in self.network.layers]


def min_input_dim(blocks: int) -> int:
    """Smallest V for which ``blocks`` conv/pool stages all fit."""
    v = 1
    while True:
        length = v
        ok = True
        for _ in range(blocks):
            if length < KERNEL_WIDTH:
                ok = False
                break
            length = length - KERNEL_WIDTH + 1
            if length < POOL_WINDOW:
                ok = False
                break
            length = (length - POOL_WINDOW) // POOL_STRIDE + 1
        if ok:
            return v
        v += 1


def build_architecture(
    arch: ArchitectureId,
    input_dim: int,
    seed: int,
    vocab_size: int | None = None,
) -> ModelInstance:
    """Construct a seeded, untrained model for the given architecture.

    ``input_dim`` is the TF-IDF width for cnn/mlfnn and the padded token
    count for tinyformer, which additionally needs ``vocab_size`` (reserved
    ids included).
    """
    if input_dim < 1:
        raise ValueError("input_dim must be positive")
    rng = np.random.default_rng(seed)

    if arch.family == "mlfnn":
        layers = []
        width = input_dim
        for i in range(arch.depth - 1):
            layers.append(Dense(f"dense{i}", width, HIDDEN_WIDTH, "relu", rng))
            width = HIDDEN_WIDTH
        layers.append(Dense(f"dense{arch.depth - 1}", width, 1, "sigmoid", rng))
        return ModelInstance(arch, Network(layers), f"tfidf_vector:{input_dim}")

    if arch.family == "cnn":
        blocks = arch.depth
        needed = min_input_dim(blocks)
        if input_dim < needed:
            raise ValueError(
                f"{arch} needs an input of at least {needed} features "
                f"for its stacked valid convolutions, got {input_dim}"
            )
        layers: list = [AddChannel()]
        length, channels = input_dim, 1
        for i in range(blocks):
            conv = Conv1d(f"conv{i}", channels, CONV_FILTERS, KERNEL_WIDTH, rng)
            pool = MaxPool1d(f"pool{i}", POOL_WINDOW, POOL_STRIDE)
            layers += [conv, pool]
            length = pool.out_length(conv.out_length(length))
            channels = CONV_FILTERS
        layers.append(Flatten())
        layers.append(Dense("dense0", length * channels, HIDDEN_WIDTH, "relu", rng))
        layers.append(Dense("dense1", HIDDEN_WIDTH, 1, "sigmoid", rng))
        return ModelInstance(arch, Network(layers), f"tfidf_vector:{input_dim}")

    if vocab_size is None:
        raise ValueError("tinyformer needs vocab_size")
    layers = [Embedding("embed", vocab_size, input_dim, D_MODEL, rng)]
    for i in range(ENCODER_DEPTH):
        layers.append(EncoderBlock(f"enc{i}", D_MODEL, HEADS, FF_WIDTH, rng))
    layers.append(SelectFirst())
    layers.append(Dense("head", D_MODEL, 1, "sigmoid", rng))
    return ModelInstance(arch, Network(layers), f"token_ids:{input_dim}")


def classify(model: ModelInstance, features: np.ndarray) -> tuple[float, int]:
    """(probability, label) for one input; label = 1 iff probability >= 0.5."""
    features = np.asarray(features)
    if features.ndim != 1 or features.shape[0] != model.input_dim:
        raise ValueError(
            f"model {model.arch} expects a {model.input_contract} input, "
            f"got shape {features.shape}"
        )
    if model.input_kind == "token_ids" and not np.issubdtype(features.dtype, np.integer):
        raise ValueError(f"model {model.arch} expects integer token ids")
    prob = float(model.predict(features[None])[0])
    return prob, int(prob >= 0.5)


@dataclass
class TokenVocab:
    """token -> id table with PAD=0, UNK=1 and CLS=2 reserved."""

    ids: dict[str, int]

    @property
    def size(self) -> int:
        return RESERVED_TOKENS + len(self.ids)

    def lookup(self, token: str) -> int:
        return self.ids.get(token, UNK_ID)


def build_token_vocab(docs: list[list[str]]) -> TokenVocab:
    """Assign ids to the distinct fit-split tokens, lexicographically."""
    terms = sorted({tok for doc in docs for tok in doc})
    return TokenVocab(ids={t: RESERVED_TOKENS + i for i, t in enumerate(terms)})


def encode_tokens(doc: list[str], vocab: TokenVocab, max_len: int = MAX_LEN) -> np.ndarray:
    """CLS-prefixed, UNK-mapped, PAD-filled id sequence of length max_len."""
    ids = [CLS_ID]
    for token in doc[: max_len - 1]:
        ids.append(vocab.lookup(token))
    ids.extend([PAD_ID] * (max_len - len(ids)))
    return np.array(ids, dtype=np.int64)


def encode_many(docs: list[list[str]], vocab: TokenVocab, max_len: int = MAX_LEN) -> np.ndarray:
    return np.stack([encode_tokens(doc, vocab, max_len) for doc in docs])


def export_token_vocab(vocab: TokenVocab) -> str:
    lines = [f"reserved={RESERVED_TOKENS}"]
    for token, idx in sorted(vocab.ids.items(), key=lambda kv: kv[1]):
        lines.append(f"{token}\t{idx}")
    return "\n".join(lines) + "\n"


def load_token_vocab(text: str) -> TokenVocab:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("reserved="):
        raise ValueError("token vocab manifest missing reserved header")
    ids: dict[str, int] = {}
    for ln in lines[1:]:
        token, idx = ln.split("\t")
        ids[token] = int(idx)
    return TokenVocab(ids=ids)


def save_model(path: str | Path, model: ModelInstance, manifest_hash: str) -> None:
    save_checkpoint(
        path,
        CheckpointData(
            arch_id=str(model.arch),
            input_contract=model.input_contract,
            manifest_hash=manifest_hash,
            tensors=model.parameters(),
        ),
    )


def load_model(path: str | Path) -> tuple[ModelInstance, str]:
    """Rebuild a ModelInstance from a checkpoint; returns (model, manifest hash)."""
    data = load_checkpoint(path)
    arch = parse_architecture_id(data.arch_id)
    kind, _, dim = data.input_contract.partition(":")
    input_dim = int(dim)
    vocab_size = None
    if kind == "token_ids":
        vocab_size = data.tensors["embed.tok"].shape[0]
    model = build_architecture(arch, input_dim, seed=0, vocab_size=vocab_size)
    params = model.parameters()
    if set(params) != set(data.tensors):
        raise ValueError(f"{path}: checkpoint tensors do not match architecture {arch}")
    for name, tensor in params.items():
        stored = data.tensors[name]
        if stored.shape != tensor.shape:
            raise ValueError(
                f"{path}: tensor {name!r} has shape {stored.shape}, expected {tensor.shape}"
            )
        tensor[...] = stored
    return model, data.manifest_hash
