import copy
import json

import pytest

from permlab.registry import (
    Category,
    Prompted,
    RegistryError,
    UnknownDescriptorError,
    descriptors_by_category,
    get_descriptor,
    load_registry,
)

# name -> (count, prompted) as printed in the top-10 usage table
TOP_TEN = {
    "clipboard-write": (32135, Prompted.NO),
    "clipboard-read": (24753, Prompted.YES),
    "geolocation": (11350, Prompted.YES),
    "background-sync": (10456, Prompted.NO),
    "notifications": (8691, Prompted.YES),
    "fullscreen": (5336, Prompted.NO),
    "microphone": (2970, Prompted.YES),
    "camera": (2959, Prompted.YES),
    "storage-access": (673, Prompted.NO),
    "display-capture": (539, Prompted.NO),
}


def test_embedded_registry_has_33(registry):
    assert len(registry) == 33
    assert len(set(registry.names)) == 33


def test_duplicate_name_rejected(registry_doc):
    doc = copy.deepcopy(registry_doc)
    camera = next(d for d in doc["descriptors"] if d["name"] == "camera")
    doc["descriptors"].append(dict(camera))
    with pytest.raises(RegistryError, match="camera: duplicate"):
        load_registry(doc)


def test_magnetometer_prompted_but_not_invocable_rejected(registry_doc):
    doc = copy.deepcopy(registry_doc)
    mag = next(d for d in doc["descriptors"] if d["name"] == "magnetometer")
    mag["prompted"] = "yes"
    with pytest.raises(RegistryError, match="magnetometer"):
        load_registry(doc)


def test_unknown_category_rejected(registry_doc):
    doc = copy.deepcopy(registry_doc)
    doc["descriptors"][0]["category"] = "Gadgets"
    with pytest.raises(RegistryError, match="unknown category"):
        load_registry(doc)


def test_missing_field_named(registry_doc):
    doc = copy.deepcopy(registry_doc)
    del doc["descriptors"][3]["web_api"]
    with pytest.raises(RegistryError, match="web_api"):
        load_registry(doc)


def test_wrong_cardinality(registry_doc):
    doc = copy.deepcopy(registry_doc)
    doc["descriptors"].pop()
    with pytest.raises(RegistryError, match="exactly 33"):
        load_registry(doc)
    assert len(load_registry(doc, exact_size=False)) == 32


def test_get_descriptor(registry):
    assert get_descriptor(registry, "nfc").web_api == "Web NFC API"
    cw = get_descriptor(registry, "clipboard-write")
    assert cw.prompted is Prompted.NO
    assert cw.reference_count == 32135
    with pytest.raises(UnknownDescriptorError):
        get_descriptor(registry, "keyboard-unlock")


def test_window_placement_is_an_alias(registry):
    assert "window-placement" not in registry.names
    assert get_descriptor(registry, "window-placement").name == "window-management"


def test_push_is_prompted(registry):
    assert get_descriptor(registry, "push").prompted is Prompted.YES


@pytest.mark.parametrize(
    "category, names",
    [
        (Category.SENSOR, {"accelerometer", "ambient-light-sensor", "gyroscope", "magnetometer"}),
        (Category.PAYMENT_AUTH, {"payment-handler", "midi"}),
        (Category.LEGACY, {"accessibility-events"}),
        (Category.WINDOW_UI, {"fullscreen", "pointer-lock", "window-management"}),
    ],
)
def test_descriptors_by_category(registry, category, names):
    assert {d.name for d in descriptors_by_category(registry, category)} == names


def test_category_tokens_parse_loosely(registry):
    assert len(descriptors_by_category(registry, "sensor")) == 4
    assert len(descriptors_by_category(registry, "payment_auth")) == 2
    with pytest.raises(ValueError):
        descriptors_by_category(registry, "nope")


def test_category_order_follows_registry(registry):
    got = [d.name for d in descriptors_by_category(registry, Category.SENSOR)]
    assert got == [n for n in registry.names if n in set(got)]


def test_category_partition(registry):
    parts = [descriptors_by_category(registry, c) for c in Category]
    flat = [d.name for p in parts for d in p]
    assert sorted(flat) == sorted(registry.names)


def test_prompted_implies_invocable(registry):
    for d in registry:
        if d.prompted is Prompted.YES:
            assert d.invocable, d.name
        if not d.invocable:
            assert d.prompted is Prompted.NA and d.reference_count == 0, d.name


def test_twelve_prompted(registry):
    assert sum(d.prompted is Prompted.YES for d in registry) == 12


def test_top_ten_counts(registry):
    for name, (count, prompted) in TOP_TEN.items():
        d = registry.get(name)
        assert (d.reference_count, d.prompted, d.invocable) == (count, prompted, True)
    by_count = sorted(registry, key=lambda d: -d.reference_count)[:10]
    assert {d.name for d in by_count} == set(TOP_TEN)


def test_round_trip(registry):
    again = load_registry(registry.dumps())
    assert again == registry
    assert json.loads(again.dumps()) == registry.to_dict()


def test_malformed_json():
    with pytest.raises(RegistryError, match="does not parse"):
        load_registry("{not json")
