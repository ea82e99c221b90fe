"""The real-model backend, exercised with a tiny randomly initialized CLIP.

No checkpoints are downloaded: the model comes from a config with random
weights and the tokenizer is a minimal WordPiece built in-process, which is
enough to verify the attention-mask plumbing end to end.
"""

import json
import subprocess
import shutil
from pathlib import Path

import numpy as np
import pytest

torch = pytest.importorskip("torch")
transformers = pytest.importorskip("transformers")

from clip_sampler.cli import main  # noqa: E402
from clip_sampler.config import SamplerConfig  # noqa: E402
from clip_sampler.encoders import clipscore, masked_subword_positions  # noqa: E402
from clip_sampler.hf_clip import HFClipEncoder  # noqa: E402
from clip_sampler.sampling import Pair, sample_scores  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def tiny_encoder():
    from tokenizers import Tokenizer, models, pre_tokenizers
    from transformers import (
        CLIPConfig,
        CLIPImageProcessor,
        CLIPModel,
        CLIPTextConfig,
        CLIPVisionConfig,
        PreTrainedTokenizerFast,
    )

    letters = "abcdefghijklmnopqrstuvwxyz"
    vocab = {"[PAD]": 0, "[UNK]": 1, "<s>": 2}
    for ch in letters:
        vocab[ch] = len(vocab)
    for ch in letters:
        vocab["##" + ch] = len(vocab)
    vocab["</s>"] = len(vocab)  # highest id, so argmax pooling finds it
    wordpiece = Tokenizer(models.WordPiece(vocab, unk_token="[UNK]"))
    wordpiece.pre_tokenizer = pre_tokenizers.Whitespace()
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=wordpiece,
        unk_token="[UNK]",
        pad_token="[PAD]",
        bos_token="<s>",
        eos_token="</s>",
    )
    tokenizer.add_special_tokens({"bos_token": "<s>", "eos_token": "</s>"})

    # wrap tokenization so specials bracket the sequence the way CLIP expects
    class BracketingTokenizer:
        def __init__(self, inner):
            self.inner = inner

        def __call__(self, words, is_split_into_words=True, add_special_tokens=True,
                     return_tensors="pt"):
            encoding = self.inner(
                [w.lower() for w in words],
                is_split_into_words=True,
                add_special_tokens=False,
            )
            ids = [self.inner.bos_token_id] + encoding["input_ids"] + [self.inner.eos_token_id]
            word_ids = [None] + encoding.word_ids(0) + [None]

            class Batch(dict):
                def word_ids(self, _index):
                    return word_ids

            batch = Batch(input_ids=torch.tensor([ids]))
            return batch

    config = CLIPConfig(
        text_config=CLIPTextConfig(
            vocab_size=len(vocab),
            hidden_size=32,
            intermediate_size=64,
            num_hidden_layers=2,
            num_attention_heads=2,
            max_position_embeddings=64,
            bos_token_id=vocab["<s>"],
            eos_token_id=vocab["</s>"],
        ),
        vision_config=CLIPVisionConfig(
            hidden_size=32,
            intermediate_size=64,
            num_hidden_layers=2,
            num_attention_heads=2,
            image_size=32,
            patch_size=8,
        ),
        projection_dim=16,
    )
    torch.manual_seed(0)
    model = CLIPModel(config)
    processor = CLIPImageProcessor(
        size={"shortest_edge": 32}, crop_size={"height": 32, "width": 32}
    )
    return HFClipEncoder(model, BracketingTokenizer(tokenizer), processor)


def test_patch_count_from_config(tiny_encoder):
    image = str(FIXTURES / "images" / "scene-a.png")
    assert tiny_encoder.patch_count(image) == 16  # (32/8)^2


def test_subword_spans_partition_the_sequence(tiny_encoder):
    words = ["dog", "chasing", "birds"]
    spans = tiny_encoder.subword_spans(words)
    assert len(spans) == 3
    flat = [p for span in spans for p in span]
    assert len(flat) == len(set(flat))
    assert all(span for span in spans)
    union = masked_subword_positions(tiny_encoder, words, {0, 2})
    assert union == frozenset(spans[0]) | frozenset(spans[2])


def test_text_masking_changes_embedding(tiny_encoder):
    words = ["dog", "chasing", "birds"]
    clean = tiny_encoder.text_embedding(words, frozenset())
    masked = tiny_encoder.text_embedding(words, frozenset({1}))
    assert not np.allclose(clean, masked)
    # masking is attention exclusion, not truncation: sequence stays valid
    assert clean.shape == masked.shape


def test_patch_masking_changes_embedding(tiny_encoder):
    image = str(FIXTURES / "images" / "scene-a.png")
    clean = tiny_encoder.image_embedding(image, frozenset())
    masked = tiny_encoder.image_embedding(image, frozenset({0, 5, 9}))
    assert not np.allclose(clean, masked)


def test_scores_bounded_through_real_model(tiny_encoder):
    image = str(FIXTURES / "images" / "scene-b.png")
    words = ["old", "lighthouse", "stands"]
    text = tiny_encoder.text_embedding(words, frozenset())
    vision = tiny_encoder.image_embedding(image, frozenset({1}))
    assert 0.0 <= clipscore(text, vision) <= 2.5


def test_full_pipeline_with_real_model_passes_ingest(tiny_encoder, tmp_path):
    config = SamplerConfig(num_image_samples=2, num_text_samples=3, seed=1)
    record = sample_scores(
        Pair("hf-1", str(FIXTURES / "images" / "scene-c.png"),
             "three children eating fresh bread"),
        config,
        tiny_encoder,
    )
    from clip_sampler.writer import write_records

    out = tmp_path / "hf.jsonl"
    write_records([record], out)
    line = json.loads(out.read_text())
    assert len(line["mask_samples"]) == 3
    riskctl = shutil.which("riskctl")
    if riskctl:
        result = subprocess.run(
            [riskctl, "report", "--data", str(out), "--out", str(tmp_path / "d.csv")],
            capture_output=True, text=True,
        )
        assert result.returncode == 0, result.stderr
