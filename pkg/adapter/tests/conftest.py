import json
from pathlib import Path

MASK_ID = 0
EOS_ID = 1


def write_table(path, targets, top_prob=0.99, content_eos=0.005, default=None):
    """Table file whose slots answer the target tokens, then EOS forever."""
    if default is None:
        default = {"top_token": EOS_ID, "top_prob": 0.99, "eos_prob": 0.99}
    data = {
        "positions": [
            {"top_token": t, "top_prob": top_prob, "eos_prob": content_eos} for t in targets
        ],
        "default": default,
    }
    Path(path).write_text(json.dumps(data), encoding="utf-8")
    return Path(path)


def request_obj(rid, gen, prompt=(7, 8), mask_id=MASK_ID, eos_id=EOS_ID):
    return {
        "id": rid,
        "tokens": list(prompt) + list(gen),
        "prompt_len": len(prompt),
        "mask_id": mask_id,
        "eos_id": eos_id,
    }


def request_line(rid, gen, **kwargs):
    return json.dumps(request_obj(rid, gen, **kwargs))
