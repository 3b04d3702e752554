#!/usr/bin/env python3
"""Build the reference checkpoints and frozen golden outputs under tests/data/.

Two fixture models are produced with seeded random weights:

  micro/      2 layers, 2 heads, d_model 16, vocab 256, stored as F32.
              Ships with full-row golden logits and attention tensors for
              fixed token-id sequences.
  ref_small/  6 layers, 6 heads, d_model 48, vocab 50257, stored as F16
              (mirrors the published checkpoint layout, including the
              per-layer attn.bias mask buffers that loaders must skip).
              Ships with tokenized golden sentences, sampled logit rows,
              and per-token surprisal.

The reference side is HuggingFace transformers (eager attention, fp32);
tokenization golden ids come from a straight port of the published GPT-2
byte-level BPE. Run from the repo root:

    python3 scripts/make_reference_fixtures.py
"""

import hashlib
import json
import os
import struct
import sys

import regex as re
import torch
from safetensors.torch import save_file
from transformers import GPT2Config, GPT2LMHeadModel

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "tests", "data")
VOCAB_JSON = os.path.join(ROOT, "assets", "gpt2-vocab", "vocab.json")
MERGES_TXT = os.path.join(ROOT, "assets", "gpt2-vocab", "merges.txt")

ACCEPTANCE_SENTENCES = [
    "The slogan on the posters were designed to get attention.",
    "The slogan on the poster was designed to get attention.",
    "The basketball coach who trained the star players usually blamed themselves for the loss.",
    "The commentators who the viewer trusts were given an award.",
    "The executive who oversaw the middle managers apparently was dishonest.",
    "The key to the cabinets was rusty from disuse.",
    "Language models assign a probability to every possible continuation.",
    "After the meeting, the managers discussed the proposal over coffee.",
    "A quick brown fox jumps over the lazy dog.",
    "The scientists who reviewed the paper found no errors in it.",
]

TOKENIZER_CASES = [
    "The slogan on the posters were designed to get attention.",
    "The basketball coach who trained the star players usually blamed themselves for the loss.",
    "naïve déjà-vu",
    "don't you've we'll I'm it's 'S",
    "1234 56.78 and 9,000 items",
    "  leading and   multiple spaces",
    "tabs\tand\nnewlines\t\tmixed",
    "CamelCase UPPER lower123mix",
    "你好 world mixed 文字",
    "🙂 emoji, and -- punctuation!?",
    "trailing space ",
    " ",
    "a",
]


# ---------------------------------------------------------------------------
# Reference byte-level BPE (port of the published GPT-2 encoder)
# ---------------------------------------------------------------------------

SPLIT_PAT = re.compile(
    r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
)


def bytes_to_unicode():
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


class RefBPE:
    def __init__(self, vocab_path, merges_path):
        with open(vocab_path, encoding="utf-8") as f:
            self.encoder = json.load(f)
        with open(merges_path, encoding="utf-8") as f:
            lines = f.read().split("\n")
        merges = [tuple(l.split()) for l in lines if l and not l.startswith("#")]
        self.bpe_ranks = dict(zip(merges, range(len(merges))))
        self.byte_encoder = bytes_to_unicode()
        self.cache = {}

    def bpe(self, token):
        if token in self.cache:
            return self.cache[token]
        word = tuple(token)
        while len(word) > 1:
            pairs = {(word[i], word[i + 1]) for i in range(len(word) - 1)}
            bigram = min(pairs, key=lambda p: self.bpe_ranks.get(p, float("inf")))
            if bigram not in self.bpe_ranks:
                break
            first, second = bigram
            new_word = []
            i = 0
            while i < len(word):
                try:
                    j = word.index(first, i)
                except ValueError:
                    new_word.extend(word[i:])
                    break
                new_word.extend(word[i:j])
                i = j
                if word[i] == first and i < len(word) - 1 and word[i + 1] == second:
                    new_word.append(first + second)
                    i += 2
                else:
                    new_word.append(word[i])
                    i += 1
            word = tuple(new_word)
        self.cache[token] = word
        return word

    def encode(self, text):
        ids = []
        for tok in re.findall(SPLIT_PAT, text):
            sym = "".join(self.byte_encoder[b] for b in tok.encode("utf-8"))
            ids.extend(self.encoder[piece] for piece in self.bpe(sym))
        return ids


# ---------------------------------------------------------------------------
# Checkpoint construction
# ---------------------------------------------------------------------------

CANON_RENAMES = {"transformer.": ""}


def canonical_state(model):
    state = {}
    for name, tensor in model.state_dict().items():
        if name == "lm_head.weight":
            continue  # tied to wte.weight
        if name.startswith("transformer."):
            name = name[len("transformer."):]
        if name.endswith((".attn.bias", ".attn.masked_bias")):
            continue
        state[name] = tensor.contiguous()
    return state


def write_config(path, cfg):
    with open(path, "w") as f:
        json.dump(
            {
                "n_layer": cfg.n_layer,
                "n_head": cfg.n_head,
                "n_embd": cfg.n_embd,
                "vocab_size": cfg.vocab_size,
                "n_positions": cfg.n_positions,
                "layer_norm_epsilon": cfg.layer_norm_epsilon,
            },
            f,
            indent=2,
        )
        f.write("\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_model(seed, **cfg_kwargs):
    torch.manual_seed(seed)
    cfg = GPT2Config(attn_implementation="eager", **cfg_kwargs)
    model = GPT2LMHeadModel(cfg)
    model.eval()
    return cfg, model


def forward(model, ids):
    with torch.no_grad():
        out = model(torch.tensor([ids]), output_attentions=True)
    logits = out.logits[0].float()
    attn = torch.stack([a[0] for a in out.attentions]).float()
    return logits, attn


def surprisal_bits(logits, ids):
    logprobs = torch.log_softmax(logits.double(), dim=-1)
    out = []
    for pos in range(1, len(ids)):
        out.append(float(-logprobs[pos - 1, ids[pos]] / torch.log(torch.tensor(2.0)).double()))
    return out


def dump_f32(path, tensor):
    with open(path, "wb") as f:
        f.write(tensor.float().contiguous().numpy().astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# micro fixture
# ---------------------------------------------------------------------------

def make_micro():
    outdir = os.path.join(DATA, "micro")
    os.makedirs(outdir, exist_ok=True)
    cfg, model = build_model(
        seed=1234, n_layer=2, n_head=2, n_embd=16, vocab_size=256, n_positions=64,
        bos_token_id=None, eos_token_id=None,
    )
    state = canonical_state(model)
    ckpt = os.path.join(outdir, "model.safetensors")
    save_file(state, ckpt)
    write_config(os.path.join(outdir, "config.json"), cfg)

    gen = torch.Generator().manual_seed(99)
    lengths = [5, 7, 9, 16, 3, 12, 8, 10, 6, 14]
    seqs = [torch.randint(0, 256, (n,), generator=gen).tolist() for n in lengths]

    logit_blobs = []
    descriptor = {"vocab_size": 256, "sequences": []}
    for ids in seqs:
        logits, _ = forward(model, ids)
        logit_blobs.append(logits)
        descriptor["sequences"].append(
            {"ids": ids, "surprisal_bits": surprisal_bits(logits, ids)}
        )
    dump_f32(os.path.join(outdir, "golden_logits.bin"), torch.cat(logit_blobs, dim=0))

    logits0, attn0 = forward(model, seqs[0])
    dump_f32(os.path.join(outdir, "golden_attn.bin"), attn0)
    descriptor["attn_sequence_index"] = 0
    descriptor["attn_shape"] = list(attn0.shape)

    with open(os.path.join(outdir, "goldens.json"), "w") as f:
        json.dump(descriptor, f)
        f.write("\n")
    print(f"micro: {ckpt} params={sum(t.numel() for t in state.values())}")


# ---------------------------------------------------------------------------
# ref_small fixture
# ---------------------------------------------------------------------------

def make_ref_small(bpe):
    outdir = os.path.join(DATA, "ref_small")
    os.makedirs(outdir, exist_ok=True)
    cfg, model = build_model(
        seed=2024, n_layer=6, n_head=6, n_embd=48, vocab_size=50257, n_positions=256,
    )
    state = {k: v.half() for k, v in canonical_state(model).items()}
    # mask buffers as found in published checkpoints; loaders must skip them
    for layer in range(cfg.n_layer):
        tril = torch.tril(torch.ones(cfg.n_positions, cfg.n_positions))
        state[f"h.{layer}.attn.bias"] = tril.view(1, 1, cfg.n_positions, cfg.n_positions)
    ckpt = os.path.join(outdir, "model.safetensors")
    save_file(state, ckpt)
    write_config(os.path.join(outdir, "config.json"), cfg)

    # goldens are computed from the f16 file contents widened back to f32
    model.load_state_dict(
        {f"transformer.{k}": v.float() for k, v in state.items()
         if not k.endswith(".attn.bias")},
        strict=False,
    )
    model = model.float().eval()

    gen = torch.Generator().manual_seed(7)
    sample = set(torch.randint(0, 50257, (256,), generator=gen).tolist())
    sentence_ids = [bpe.encode(s) for s in ACCEPTANCE_SENTENCES]
    for ids in sentence_ids:
        sample.update(ids)
    sample = sorted(sample)

    descriptor = {
        "sample_indices": sample,
        "sentences": [],
    }
    rows = []
    for text, ids in zip(ACCEPTANCE_SENTENCES, sentence_ids):
        logits, _ = forward(model, ids)
        rows.append(logits[:, sample])
        descriptor["sentences"].append(
            {
                "text": text,
                "ids": ids,
                "surprisal_bits": surprisal_bits(logits, ids),
                "argmax": logits.argmax(dim=-1).tolist(),
            }
        )
    dump_f32(os.path.join(outdir, "golden_sampled_logits.bin"), torch.cat(rows, dim=0))
    with open(os.path.join(outdir, "goldens.json"), "w") as f:
        json.dump(descriptor, f)
        f.write("\n")

    wte8 = state["wte.weight"][0, :8].float().tolist()
    info = {
        "sha256": sha256_file(ckpt),
        "probe_tensor": "wte.weight",
        "probe_first8_f32": wte8,
    }
    with open(os.path.join(outdir, "checkpoint_info.json"), "w") as f:
        json.dump(info, f, indent=2)
        f.write("\n")
    print(f"ref_small: {ckpt} sha256={info['sha256'][:16]}…")


def make_tokenizer_goldens(bpe):
    outdir = os.path.join(DATA, "tokenizer")
    os.makedirs(outdir, exist_ok=True)
    cases = []
    for text in TOKENIZER_CASES:
        cases.append({"text": text, "ids": bpe.encode(text)})
    with open(os.path.join(outdir, "golden_ids.json"), "w") as f:
        json.dump({"cases": cases}, f, ensure_ascii=False)
        f.write("\n")
    print(f"tokenizer goldens: {len(cases)} cases")


def main():
    torch.set_num_threads(2)
    bpe = RefBPE(VOCAB_JSON, MERGES_TXT)
    make_tokenizer_goldens(bpe)
    make_micro()
    make_ref_small(bpe)


if __name__ == "__main__":
    sys.exit(main())
