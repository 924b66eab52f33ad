import pytest
import torch

from etsl.errors import ConfigError, SourceTooLong, TargetTooLong
from etsl.model import (
    ModelConfig,
    SignTranslator,
    causal_mask,
    greedy_decode,
    shift_right,
    sinusoidal_encoding,
)
from etsl.training import cross_entropy_loss
from etsl.vocab import BOS, EOS, PAD

from helpers import central_diff, max_rel_error


def tiny(variant="p2t-t", vocab=7, dropout=0.0, **kw):
    torch.manual_seed(0)
    cfg = ModelConfig(vocab_size=vocab, d_model=8, heads=2, encoder_layers=1, decoder_layers=1,
                      ff_dim=16, dropout=dropout, max_source_len=20, max_target_len=10)
    return SignTranslator(cfg, variant, **kw).double().eval()


def feats_for(variant, b=2, s=5):
    g = torch.Generator().manual_seed(1)
    shape = (b, s, 159) if variant == "p2t-t" else (b, s, 53, 3)
    return torch.randn(*shape, generator=g, dtype=torch.float64)


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=10, d_model=10, heads=3).validate()
    with pytest.raises(ConfigError):
        SignTranslator(ModelConfig(vocab_size=10, d_model=8, heads=2), "cnn-t")


def test_positional_encoding_values():
    pe = sinusoidal_encoding(4, 6)
    assert pe[0, 0::2].abs().max() == 0 and (pe[0, 1::2] == 1).all()
    assert pe[3, 2] == pytest.approx(torch.sin(torch.tensor(3 / 10000 ** (2 / 6), dtype=torch.float64)).item())


@pytest.mark.parametrize("variant", ["p2t-t", "gnn-t"])
def test_output_shape(variant):
    m = tiny(variant)
    tgt = torch.tensor([[4, 5, EOS], [6, EOS, PAD]])
    out = m(feats_for(variant), None, tgt)
    assert out.shape == (2, 3, 7)


def test_shift_right():
    assert shift_right(torch.tensor([[4, 5, EOS]])).tolist() == [[BOS, 4, 5]]


def test_decoder_is_causal():
    m = tiny()
    x = feats_for("p2t-t", b=1)
    memory = m.encode(x)
    a = torch.tensor([[BOS, 4, 5, 6, 4]])
    b = a.clone()
    b[0, 3] = 5
    la, lb = m.decode(memory, None, a), m.decode(memory, None, b)
    torch.testing.assert_close(la[:, :3], lb[:, :3], rtol=0, atol=0)
    assert not torch.allclose(la[:, 3:], lb[:, 3:])


def test_source_padding_is_ignored():
    m = tiny()
    x = feats_for("p2t-t", b=1, s=6)
    mask = torch.tensor([[True] * 4 + [False] * 2])
    y = x.clone()
    y[0, 4:] = 99.0
    tgt = torch.tensor([[4, 5, EOS]])
    torch.testing.assert_close(m(x, mask, tgt), m(y, mask, tgt), rtol=0, atol=1e-12)


def test_attention_rows_sum_to_one():
    m = tiny()
    attn = m.transformer.decoder[0].self_attn
    attn.keep_weights = True
    m(feats_for("p2t-t"), None, torch.tensor([[4, 5, EOS], [6, EOS, PAD]]))
    w = attn.last_weights
    torch.testing.assert_close(w.sum(-1), torch.ones_like(w.sum(-1)))
    assert (w.triu(1) == 0).all()


def test_length_limits():
    m = tiny()
    with pytest.raises(SourceTooLong):
        m.encode(torch.zeros(1, 21, 159, dtype=torch.float64))
    with pytest.raises(TargetTooLong):
        m(feats_for("p2t-t", b=1), None, torch.full((1, 11), 4))


class Scripted:
    """Stub decoder emitting a fixed token per step."""

    def __init__(self, script, vocab=10):
        self.script, self.vocab = script, vocab

    def encode(self, features, source_mask=None):
        return features

    def decode(self, memory, source_mask, decoder_input):
        b, t = decoder_input.shape
        logits = torch.zeros(b, t, self.vocab)
        tok = self.script[min(t - 1, len(self.script) - 1)]
        logits[:, -1, tok] = 1.0
        return logits


def test_greedy_eos_first_gives_empty():
    assert greedy_decode(Scripted([EOS]), torch.zeros(1, 3), 10) == [[]]


def test_greedy_stops_at_eos():
    assert greedy_decode(Scripted([7, 7, 7, EOS, 5]), torch.zeros(2, 3), 10) == [[7, 7, 7], [7, 7, 7]]


def test_greedy_length_cap():
    assert greedy_decode(Scripted([8]), torch.zeros(1, 3), 4) == [[8, 8, 8, 8]]


class Tied(Scripted):
    def decode(self, memory, source_mask, decoder_input):
        b, t = decoder_input.shape
        logits = torch.zeros(b, t, self.vocab)
        logits[:, -1, [6, 9]] = 1.0
        if t > 1:
            logits[:, -1, EOS] = 2.0
        return logits


def test_greedy_tie_breaks_low():
    assert greedy_decode(Tied([]), torch.zeros(1, 3), 5) == [[6]]


@pytest.mark.parametrize("variant", ["p2t-t", "gnn-t"])
def test_transformer_gradients_match_finite_differences(variant):
    m = tiny(variant, gnn_out_dim=4) if variant == "gnn-t" else tiny(variant)
    x = feats_for(variant, b=2, s=4)
    mask = torch.tensor([[True] * 4, [True] * 3 + [False]])
    tgt = torch.tensor([[4, 5, 6, EOS], [3, 4, EOS, PAD]])
    params = [p for p in m.parameters() if p.requires_grad]

    def loss():
        return cross_entropy_loss(m(x, mask, tgt), tgt)

    m.zero_grad()
    loss().backward()
    analytic = [p.grad.clone() for p in params]
    numeric = central_diff(loss, params)
    assert max_rel_error(analytic, numeric) < 1e-4


def test_causal_mask():
    assert causal_mask(3).tolist() == [[True, False, False], [True, True, False], [True, True, True]]


@pytest.mark.parametrize("s", [1, 12, 37, 64])
def test_encoder_preserves_length_and_is_deterministic(s):
    torch.manual_seed(0)
    cfg = ModelConfig(vocab_size=10, d_model=8, heads=2, encoder_layers=1, decoder_layers=1,
                      ff_dim=16, dropout=0.1, max_source_len=64, max_target_len=64)
    m = SignTranslator(cfg).double().eval()
    x = torch.randn(1, s, 159, dtype=torch.float64)
    mem = m.encode(x)
    assert mem.shape == (1, s, 8)
    torch.testing.assert_close(mem, m.encode(x), rtol=0, atol=0)
    t = max(1, s // 2)
    tgt = torch.randint(4, 10, (1, t))
    assert m(x, None, tgt).shape == (1, t, 10)


def test_bos_only_prefix_shape():
    m = tiny(vocab=10)
    memory = m.encode(feats_for("p2t-t", b=1))
    assert m.decode(memory, None, torch.tensor([[BOS]])).shape == (1, 1, 10)


def test_greedy_decode_is_deterministic():
    m = tiny()
    x = feats_for("p2t-t")
    assert greedy_decode(m, x, 8) == greedy_decode(m, x, 8)
