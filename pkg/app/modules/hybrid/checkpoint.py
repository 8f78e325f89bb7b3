"""JSON checkpoints for hybrid models."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import torch
from pydantic import BaseModel

from app.core.artifacts import write_document
from app.modules.circuit import dumps_circuit, loads_circuit
from app.modules.engine import ZString
from app.modules.hybrid.model import DTYPE, DenseNet, HybridModel, QuantumNode, TrainingError

logger = logging.getLogger(__name__)

FORMAT = "qpie-checkpoint/1"


def checkpoint_document(
    model: HybridModel,
    *,
    config: BaseModel | dict[str, Any] | None = None,
    seed: int | None = None,
    extra: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Everything needed to rebuild ``model``; floats serialise at full precision."""
    frontend = model.frontend
    doc: dict[str, Any] = {
        "format": FORMAT,
        "task": model.task,
        "n_inputs": model.n_inputs,
        "n_outputs": model.n_outputs,
        "frontend": None
        if frontend is None
        else {
            "n_outputs": frontend.n_outputs,
            "hidden": list(frontend.hidden),
            "dropout": frontend.dropout,
            "freeze_mask": list(frontend.freeze_mask),
        },
        "nodes": [
            {
                "circuit": dumps_circuit(node.circuit),
                "observables": [{"qubits": list(o.qubits), "coeff": o.coeff} for o in node.observables],
            }
            for node in model.nodes
        ],
        "state": {name: tensor.detach().tolist() for name, tensor in model.state_dict().items()},
        "config": config.model_dump(mode="json") if isinstance(config, BaseModel) else config,
        "seed": seed,
    }
    if extra:
        doc.update(extra)
    return doc


def model_from_document(doc: dict[str, Any]) -> HybridModel:
    if doc.get("format") != FORMAT:
        raise TrainingError(f"not a {FORMAT} document (format={doc.get('format')!r})")
    nodes = [
        QuantumNode(
            loads_circuit(entry["circuit"]),
            observables=[ZString(tuple(o["qubits"]), o["coeff"]) for o in entry["observables"]],
        )
        for entry in doc["nodes"]
    ]
    frontend = None
    spec = doc.get("frontend")
    if spec is not None:
        frontend = DenseNet(doc["n_inputs"], spec["n_outputs"], spec["hidden"], spec["dropout"])
    model = HybridModel(nodes, doc["n_outputs"], frontend=frontend, n_inputs=doc["n_inputs"], task=doc["task"])
    state = {name: torch.as_tensor(value, dtype=DTYPE) for name, value in doc["state"].items()}
    model.load_state_dict(state)
    if frontend is not None:
        frontend.set_freeze_mask(spec["freeze_mask"])
    model.eval()
    return model


def save_checkpoint(
    model: HybridModel,
    out_dir: Path,
    name: str = "checkpoint.json",
    *,
    config: BaseModel | dict[str, Any] | None = None,
    seed: int | None = None,
    extra: dict[str, Any] | None = None,
) -> Path:
    return write_document(checkpoint_document(model, config=config, seed=seed, extra=extra), out_dir, name)


def load_checkpoint(path: Path | str) -> tuple[HybridModel, dict[str, Any]]:
    """Rebuild the model; returns it with the raw document."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TrainingError(f"cannot read checkpoint {path}: {exc}") from exc
    model = model_from_document(doc)
    logger.info("Loaded checkpoint %s (%d quantum nodes)", path, len(model.nodes))
    return model, doc
