import pytest
import torch

from semtab_sidecar import extract_last_token_state, last_token_indices


class TestLastTokenIndices:
    def test_right_padding(self):
        mask = torch.tensor([[1, 1, 1, 0, 0]])
        assert last_token_indices(mask).tolist() == [2]

    def test_unpadded_row(self):
        mask = torch.ones(1, 7, dtype=torch.long)
        assert last_token_indices(mask).tolist() == [6]

    def test_left_padding(self):
        mask = torch.tensor([[0, 0, 1, 1]])
        assert last_token_indices(mask).tolist() == [3]

    def test_mixed_batch(self):
        mask = torch.tensor([[1, 1, 0], [1, 1, 1], [1, 0, 0]])
        assert last_token_indices(mask).tolist() == [1, 2, 0]

    def test_all_padding_row_rejected(self):
        with pytest.raises(ValueError):
            last_token_indices(torch.tensor([[0, 0, 0]]))


class TestExtract:
    def test_selects_expected_rows(self):
        hidden = torch.arange(2 * 4 * 3, dtype=torch.float32).reshape(2, 4, 3)
        mask = torch.tensor([[1, 1, 0, 0], [1, 1, 1, 1]])
        got = extract_last_token_state(hidden, mask)
        assert torch.equal(got[0], hidden[0, 1])
        assert torch.equal(got[1], hidden[1, 3])
        assert got.dtype == torch.float32

    def test_float32_on_wire(self):
        hidden = torch.randn(1, 2, 4, dtype=torch.float64)
        mask = torch.tensor([[1, 1]])
        assert extract_last_token_state(hidden, mask).dtype == torch.float32
