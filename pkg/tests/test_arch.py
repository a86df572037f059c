import pytest

from conftest import FIXTURES
from slicedconv import ArchInfo, ConvInfo, ConvParams, MkInfo, load_arch, load_mk, serialize_arch
from slicedconv.arch import parse_arch_text


def test_load_intel_fixture():
    arch = load_arch(FIXTURES / "intel.toml")
    assert arch.l1_bytes == 49152
    assert arch.l2_bytes == 524288
    assert arch.l3_bytes == 16777216
    assert arch.cache_line_bytes == 64


def test_empty_file_defaults(tmp_path):
    f = tmp_path / "empty.txt"
    f.write_text("")
    arch = load_arch(f)
    assert arch.l1_bytes == 32 * 1024
    assert arch.l2_bytes == 1024 * 1024
    assert arch.l3_bytes == 0
    assert arch.cache_line_bytes == 64


def test_l1_exceeding_l2_rejected(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("l1_kib = 2048\nl2_kib = 512\n")
    with pytest.raises(ValueError):
        load_arch(f)


def test_roundtrip(tmp_path):
    arch = load_arch(FIXTURES / "calibrated.toml")
    f = tmp_path / "rt.txt"
    f.write_text(serialize_arch(arch))
    assert load_arch(f) == arch


@pytest.mark.parametrize("text", [
    "l1_kib",                 # no value
    "mystery = 12",           # unknown key
    "l1_kib = lots",          # not an integer
])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_arch_text(text)


def test_comments_and_blanks():
    vals = parse_arch_text("# header\n\nl1_kib = 48  # inline\n")
    assert vals == {"l1_kib": 48}


def test_load_mk_from_file_and_override():
    mk = load_mk(FIXTURES / "calibrated.toml")
    assert (mk.n_win, mk.n_f, mk.vector_bytes) == (16, 8, 16)
    mk = load_mk(FIXTURES / "calibrated.toml", n_win=4, n_f=4)
    assert (mk.n_win, mk.n_f) == (4, 4)


def test_load_mk_missing(tmp_path):
    f = tmp_path / "arch.txt"
    f.write_text("l1_kib = 32\n")
    with pytest.raises(ValueError):
        load_mk(f)


def test_descriptor_invariants():
    with pytest.raises(ValueError):
        ArchInfo(l1_bytes=4096, l2_bytes=2048)
    with pytest.raises(ValueError):
        ArchInfo(l1_bytes=1024, l2_bytes=2048, cache_line_bytes=3)
    with pytest.raises(ValueError):
        MkInfo(n_win=0, n_f=8)
    info = ConvInfo.from_params(ConvParams(n=1, ic=1, ih=5, iw=7, oc=1, fh=3, fw=3))
    assert info.ohw == info.oh * info.ow == 15
