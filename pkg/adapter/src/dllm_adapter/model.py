"""Real-checkpoint backend.

torch and transformers are imported only when a checkpoint is actually
requested, so the mock path carries no heavyweight dependencies.
Probabilities come from the model's final softmax, no temperature; the
argmax of that distribution and the EOS column are all the wire format
needs.
"""

from __future__ import annotations

from .protocol import AdapterStartupError, ModelRequestError, Request


class CheckpointModel:
    def __init__(self, path: str):
        try:
            import torch
            from transformers import AutoModel
        except ImportError as err:
            raise AdapterStartupError(
                f"loading a checkpoint requires torch and transformers: {err}"
            ) from err
        self._torch = torch
        try:
            self.model = AutoModel.from_pretrained(path, trust_remote_code=True)
        except Exception as err:
            raise AdapterStartupError(f"could not load checkpoint {path}: {err}") from err
        self.model.eval()

    def predictions(self, req: Request) -> list[dict]:
        torch = self._torch
        with torch.no_grad():
            ids = torch.tensor([list(req.tokens)], dtype=torch.long)
            output = self.model(input_ids=ids)
            logits = getattr(output, "logits", None)
            if logits is None:
                raise ModelRequestError("model output carries no logits")
            probs = torch.softmax(logits[0].float(), dim=-1)
        vocab_size = probs.shape[-1]
        if req.eos_id >= vocab_size:
            raise ModelRequestError(
                f"eos id {req.eos_id} is outside the model vocabulary ({vocab_size})"
            )
        out = []
        for slot in req.masked_slots():
            row = probs[req.prompt_len + slot]
            top = int(row.argmax())
            out.append(
                {
                    "pos": slot,
                    "top_token": top,
                    "top_prob": float(row[top]),
                    "eos_prob": float(row[req.eos_id]),
                }
            )
        return out
