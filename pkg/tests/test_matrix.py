import copy
from itertools import combinations

import pytest

from permlab.matrix import (
    DefaultState as S,
    MatrixError,
    QueryContext,
    UnknownTargetError,
    default_state,
    diff_targets,
    load_matrix,
)
from permlab.registry import UnknownDescriptorError

INSTALLED, TAB = QueryContext.INSTALLED_PWA, QueryContext.BROWSER_TAB


def test_full_grid(matrix):
    assert len(matrix.targets) == 9
    assert len(matrix) == 33 * 9 == 297
    assert {t.platform.value for t in matrix.targets} == {"iOS", "Android", "Desktop"}
    assert len(matrix.targets_on("Android")) == 6
    assert all(t.pwa_install_supported for t in matrix.targets)


def test_missing_cell(matrix_doc, registry):
    doc = copy.deepcopy(matrix_doc)
    del doc["cells"]["midi"]["desktop-edge"]
    with pytest.raises(MatrixError, match=r"missing cell \(midi, desktop-edge\)"):
        load_matrix(doc, registry)


def test_invalid_code(matrix_doc, registry):
    doc = copy.deepcopy(matrix_doc)
    doc["cells"]["camera"]["ios-combined"] = "x"
    with pytest.raises(MatrixError, match="invalid state code"):
        load_matrix(doc, registry)


def test_unknown_descriptor_and_target(matrix_doc, registry):
    doc = copy.deepcopy(matrix_doc)
    doc["cells"]["teleport"] = {}
    with pytest.raises(MatrixError, match="unknown descriptor"):
        load_matrix(doc, registry)
    doc = copy.deepcopy(matrix_doc)
    doc["cells"]["camera"]["android-netscape"] = "p"
    with pytest.raises(MatrixError, match="unknown target"):
        load_matrix(doc, registry)


@pytest.mark.parametrize(
    "descriptor, target, context, expected",
    [
        ("background-sync", "android-brave", INSTALLED, S.DENIED),
        ("camera", "ios-combined", TAB, S.PROMPTED),
        ("periodic-background-sync", "android-chrome", TAB, S.DENIED),
        ("periodic-background-sync", "android-chrome", INSTALLED, S.GRANTED),
        ("midi", "desktop-chrome", TAB, S.GRANTED),
        ("keyboard-lock", "android-samsung-internet", TAB, S.UNSUPPORTED),
    ],
)
def test_default_state(matrix, descriptor, target, context, expected):
    assert default_state(matrix, descriptor, target, context) is expected


def test_default_context_is_tab(matrix):
    assert default_state(matrix, "periodic-background-sync", "android-chrome") is S.DENIED


def test_default_state_errors(matrix):
    with pytest.raises(UnknownDescriptorError):
        default_state(matrix, "nope", "android-chrome")
    with pytest.raises(UnknownTargetError):
        default_state(matrix, "camera", "android-nope")


def test_g_star_only_on_android_chrome(matrix):
    starred = [k for k, v in matrix.cells.items() if v is S.GRANTED_WHEN_INSTALLED]
    assert starred == [("periodic-background-sync", "android-chrome")]


def test_diff_identity(matrix):
    assert diff_targets(matrix, "android-chrome", "android-chrome") == []


def test_diff_examples(matrix):
    assert ("periodic-background-sync", S.GRANTED_WHEN_INSTALLED, S.DENIED) in diff_targets(
        matrix, "android-chrome", "android-edge"
    )
    desk = diff_targets(matrix, "desktop-chrome", "desktop-edge")
    assert desk == [("midi", S.GRANTED, S.PROMPTED)]
    names = [d[0] for d in diff_targets(matrix, "android-opera", "android-brave")]
    assert names == sorted(names)
    with pytest.raises(UnknownTargetError):
        diff_targets(matrix, "x", "y")


def test_universal_prompts(matrix):
    for name in ("camera", "microphone", "geolocation"):
        for t in matrix.target_ids:
            assert matrix.raw(name, t) is S.PROMPTED


def test_ios_only_prompted_or_unsupported(matrix):
    col = matrix.column("ios-combined")
    assert set(col.values()) <= {S.PROMPTED, S.UNSUPPORTED}


def test_android_columns_distinct_raw(matrix):
    cols = {t: tuple(matrix.column(t).values()) for t in matrix.targets_on("Android")}
    for a, b in combinations(cols, 2):
        assert cols[a] != cols[b], (a, b)


def test_android_chrome_edge_only_differ_by_g_star(matrix):
    # in a plain tab the starred cell reads as denied, making these two columns equal
    assert matrix.column("android-chrome", TAB) == matrix.column("android-edge", TAB)


def test_round_trip(matrix, registry):
    again = load_matrix(matrix.dumps(), registry)
    assert again.to_dict() == matrix.to_dict()
    assert dict(again.cells) == dict(matrix.cells)


def test_local_fonts_follows_grid(matrix):
    assert set(matrix.column("desktop-chrome").values()) >= {S.UNSUPPORTED}
    assert matrix.raw("local-fonts", "desktop-chrome") is S.UNSUPPORTED
