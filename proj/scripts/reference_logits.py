#!/usr/bin/env python3
"""Compute reference forward-pass values for a GPT-2 checkpoint directory.

Used by the acceptance suite as the independent implementation when a real
checkpoint is supplied: tokenizes the given sentences with the reference BPE,
runs the HuggingFace model in fp32, and writes ids, per-token surprisal, and
logits sampled at fixed vocabulary indices.

    python3 scripts/reference_logits.py --model-dir assets/gpt2 \
        --sentences sentences.txt --out reference.json

The model directory must hold model.safetensors, vocab.json, and merges.txt
(config.json optional; the 124M shape is assumed otherwise).
"""

import argparse
import importlib.util
import json
import os
import sys

import torch


def load_ref_bpe(vocab, merges):
    here = os.path.dirname(os.path.abspath(__file__))
    spec = importlib.util.spec_from_file_location(
        "fixtures", os.path.join(here, "make_reference_fixtures.py"))
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod.RefBPE(vocab, merges)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--model-dir", required=True)
    parser.add_argument("--sentences", required=True, help="one sentence per line")
    parser.add_argument("--out", required=True)
    parser.add_argument("--n-sample-indices", type=int, default=256)
    args = parser.parse_args()

    from transformers import GPT2Config, GPT2LMHeadModel
    from safetensors.torch import load_file

    cfg_path = os.path.join(args.model_dir, "config.json")
    cfg_kwargs = {}
    if os.path.exists(cfg_path):
        with open(cfg_path) as f:
            raw = json.load(f)
        for key in ("n_layer", "n_head", "n_embd", "vocab_size", "n_positions",
                    "layer_norm_epsilon"):
            if key in raw:
                cfg_kwargs[key] = raw[key]
    config = GPT2Config(attn_implementation="eager", **cfg_kwargs)
    model = GPT2LMHeadModel(config)

    state = load_file(os.path.join(args.model_dir, "model.safetensors"))
    renamed = {}
    for name, tensor in state.items():
        if name.startswith("transformer."):
            name = name[len("transformer."):]
        if name == "lm_head.weight" or name.endswith((".attn.bias", ".attn.masked_bias")):
            continue
        renamed["transformer." + name] = tensor.float()
    missing, unexpected = model.load_state_dict(renamed, strict=False)
    missing = [m for m in missing if not m.endswith((".attn.bias", ".attn.masked_bias"))
               and m != "lm_head.weight"]
    if missing:
        raise SystemExit(f"checkpoint is missing tensors: {missing[:4]}")
    model = model.float().eval()

    bpe = load_ref_bpe(os.path.join(args.model_dir, "vocab.json"),
                       os.path.join(args.model_dir, "merges.txt"))

    with open(args.sentences) as f:
        sentences = [line.rstrip("\n") for line in f if line.strip()]

    gen = torch.Generator().manual_seed(7)
    sample = set(torch.randint(0, config.vocab_size,
                               (args.n_sample_indices,), generator=gen).tolist())
    all_ids = [bpe.encode(s) for s in sentences]
    for ids in all_ids:
        sample.update(ids)
    sample = sorted(sample)

    ln2 = torch.log(torch.tensor(2.0)).double()
    out = {"sample_indices": sample, "sentences": []}
    for text, ids in zip(sentences, all_ids):
        with torch.no_grad():
            logits = model(torch.tensor([ids])).logits[0].float()
        logprobs = torch.log_softmax(logits.double(), dim=-1)
        surprisal = [float(-logprobs[p - 1, ids[p]] / ln2) for p in range(1, len(ids))]
        out["sentences"].append({
            "text": text,
            "ids": ids,
            "surprisal_bits": surprisal,
            "argmax": logits.argmax(dim=-1).tolist(),
            "sampled_logits": logits[:, sample].tolist(),
        })

    with open(args.out, "w") as f:
        json.dump(out, f)
    print(f"wrote {args.out}: {len(sentences)} sentences")


if __name__ == "__main__":
    sys.exit(main())
