"""Builds tiny randomly-initialized checkpoints on disk so the export
pipeline can be exercised without network access or real weights."""

import numpy as np
import pytest
import torch
from PIL import Image
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (
    CLIPConfig,
    CLIPImageProcessor,
    CLIPModel,
    CLIPTextConfig,
    CLIPVisionConfig,
    PreTrainedTokenizerFast,
    SiglipImageProcessor,
    SiglipVisionConfig,
    SiglipVisionModel,
)


def _char_tokenizer():
    vocab = {"<pad>": 0, "<bos>": 1, "<eos>": 2, "<unk>": 3}
    for i, ch in enumerate("abcdefghijklmnopqrstuvwxyz "):
        vocab[ch] = 4 + i
    tok = Tokenizer(models.WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.Split("", "isolated")
    return PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token="<pad>", bos_token="<bos>",
        eos_token="<eos>", unk_token="<unk>", model_max_length=16,
    )


@pytest.fixture(scope="session")
def clip_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny_clip")
    torch.manual_seed(0)
    text_config = CLIPTextConfig(
        hidden_size=32, intermediate_size=64, num_hidden_layers=2,
        num_attention_heads=2, vocab_size=31, max_position_embeddings=16,
        bos_token_id=1, eos_token_id=2, pad_token_id=0,
    )
    vision_config = CLIPVisionConfig(
        hidden_size=48, intermediate_size=96, num_hidden_layers=2,
        num_attention_heads=2, image_size=32, patch_size=16,
    )
    config = CLIPConfig(text_config=text_config.to_dict(),
                        vision_config=vision_config.to_dict(), projection_dim=24)
    CLIPModel(config).save_pretrained(path)
    CLIPImageProcessor(size={"shortest_edge": 32},
                       crop_size={"height": 32, "width": 32}).save_pretrained(path)
    _char_tokenizer().save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def siglip_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny_siglip")
    torch.manual_seed(1)
    config = SiglipVisionConfig(
        hidden_size=32, intermediate_size=64, num_hidden_layers=2,
        num_attention_heads=2, image_size=32, patch_size=16,
    )
    SiglipVisionModel(config).save_pretrained(path)
    SiglipImageProcessor(size={"height": 32, "width": 32}).save_pretrained(path)
    return path


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """32 random images across 4 class subdirectories."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(7)
    for label in range(4):
        sub = root / f"class_{label}"
        sub.mkdir()
        for i in range(8):
            pixels = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
            Image.fromarray(pixels).save(sub / f"img_{i:02d}.png")
    return root


@pytest.fixture(scope="session")
def caption_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("captions") / "captions.txt"
    rng = np.random.default_rng(11)
    words = ["cat", "dog", "bird", "tree", "car", "house", "river", "cloud"]
    lines = [
        " ".join(rng.choice(words, size=rng.integers(2, 5)))
        for _ in range(32)
    ]
    path.write_text("\n".join(lines) + "\n")
    return path
