import pytest
import torch

from dualprior.common.exceptions import CodeIndexError, ShapeError
from dualprior.prior.quantize import Codebook, quantize


def create_dummy_codebook(entries) -> Codebook:
    entries = torch.tensor(entries, dtype=torch.float32)
    codebook = Codebook(entries.shape[0], entries.shape[1])
    with torch.no_grad():
        codebook.entries.copy_(entries)
    return codebook


def test_quantize_picks_nearest_entry():
    codebook = create_dummy_codebook([[0.0, 0.0], [1.0, 1.0], [-2.0, 0.5]])
    z = torch.tensor([[[0.9, 0.8], [-1.5, 0.4], [0.1, -0.1]]])

    quantized = quantize(z, codebook)

    assert quantized.indices.tolist() == [[1, 2, 0]]
    assert torch.equal(quantized.values, codebook.entries[quantized.indices].detach())


def test_ties_go_to_the_smallest_index():
    codebook = create_dummy_codebook([[-1.0], [1.0]])

    assert quantize(torch.zeros(1, 1), codebook).indices.tolist() == [0]


def test_duplicate_entries_resolve_to_the_first():
    codebook = create_dummy_codebook([[3.0, 0.0], [1.0, 1.0], [1.0, 1.0]])

    assert quantize(torch.ones(4, 2), codebook).indices.tolist() == [1, 1, 1, 1]


def test_quantized_tokens_are_codebook_rows(generator):
    codebook = Codebook(16, 8)
    z = torch.randn(2, 3, 2, 2, 8, generator=generator) * 0.05

    values = quantize(z, codebook).values.reshape(-1, 8)

    rows = {tuple(row.tolist()) for row in codebook.entries.detach()}
    assert all(tuple(token.tolist()) in rows for token in values.detach())


def test_straight_through_passes_gradients_to_z_only(generator):
    codebook = Codebook(8, 4)
    z = torch.randn(1, 2, 2, 2, 4, generator=generator, requires_grad=True)

    quantize(z, codebook, straight_through=True).values.sum().backward()

    assert torch.equal(z.grad, torch.ones_like(z))
    assert codebook.entries.grad is None


def test_hard_lookup_routes_gradients_to_selected_entries():
    codebook = create_dummy_codebook([[0.0], [1.0], [5.0]])

    quantize(torch.tensor([[0.9], [1.2]]), codebook).values.sum().backward()

    assert codebook.entries.grad.flatten().tolist() == [0.0, 2.0, 0.0]


def test_dimension_mismatch():
    with pytest.raises(ShapeError) as e:
        quantize(torch.zeros(2, 3), Codebook(4, 2))

    assert e.value.dimension == "d"


def test_lookup_rejects_out_of_range_indices():
    with pytest.raises(CodeIndexError):
        Codebook(4, 2).lookup(torch.tensor([0, 4]))


def test_codebook_needs_two_entries():
    with pytest.raises(ValueError):
        Codebook(1, 4)
