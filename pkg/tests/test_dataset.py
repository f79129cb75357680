import numpy as np
import pytest

from segcomplexity.dataset import (
    BUILTIN_GROUPINGS,
    ConstantRatingsError,
    DatasetManifest,
    GroupingError,
    GroupingScheme,
    ManifestError,
    ManifestRow,
    MissingFeaturesError,
    build_image_sets,
    join_features,
    merge_categories,
    normalize_ratings,
    normalize_skeleton,
    read_manifest,
    write_manifest,
)
from segcomplexity.evaluation import spearman

from conftest import feature_vector


def manifest(name, rows):
    return DatasetManifest(name=name, rows=tuple(
        ManifestRow(image_id=i, image_path=f"{i}.png", category=c, raw_rating=r)
        for i, c, r in rows))


IC9600 = manifest("ic9600", [
    ("s1", "scenes", 3.0), ("s2", "scenes", 1.0),
    ("o1", "objects", 2.0),
    ("p1", "person", 4.0),
    ("t1", "transportation", 5.0),
    ("a1", "architecture", 2.5),
    ("pa1", "paintings", 1.5), ("pa2", "paintings", 4.5),
    ("ab1", "abstract", 3.5),
    ("ad1", "advertisement", 2.0),
])

SAVOIAS = manifest("savoias", [
    ("v1", "scenes", 10.0), ("v2", "objects", 30.0),
    ("v3", "art", 50.0), ("v4", "suprematism", 20.0), ("v5", "suprematism", 80.0),
    ("v6", "interior_design", 60.0), ("v7", "interior_design", 40.0),
    ("v8", "advertisement", 70.0), ("v9", "visualisation", 90.0),
])


class TestNormalize:
    def test_minmax_basic(self):
        out = normalize_ratings([0.2, 0.7, 1.2])
        assert out.tolist() == pytest.approx([0.0, 50.0, 100.0], abs=1e-12)

    def test_already_spanning_unchanged(self):
        out = normalize_ratings([0.0, 25.0, 100.0])
        assert out.tolist() == pytest.approx([0.0, 25.0, 100.0], abs=1e-12)

    def test_constant_rejected(self):
        with pytest.raises(ConstantRatingsError):
            normalize_ratings([3.0, 3.0, 3.0])

    def test_order_preserved(self, rng):
        raw = rng.standard_normal(50) * 40 + 7
        normalized = normalize_ratings(raw)
        assert spearman(raw, normalized) == 1.0
        assert normalized.min() == 0.0
        assert normalized.max() == 100.0

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown normalization"):
            normalize_ratings([1.0, 2.0], method="zscore")


class TestMergeCategories:
    def test_ic9_scenes_builtin(self):
        (skeleton,) = merge_categories([IC9600], "IC9. Scenes")
        assert {r.image_id for r in skeleton.rows} == {"s1", "s2", "o1", "p1", "t1", "a1"}
        assert all(r.category != "paintings" for r in skeleton.rows)

    def test_wildcard_excludes_advertisement_and_visualisation(self):
        scheme = GroupingScheme(name="sav-all", select=(("savoias", None),))
        (skeleton,) = merge_categories([SAVOIAS], scheme)
        ids = {r.image_id for r in skeleton.rows}
        assert "v8" not in ids and "v9" not in ids
        assert len(ids) == 7

    def test_single_category_identity(self):
        (skeleton,) = merge_categories([IC9600], "IC9. Paintings")
        assert [r.image_id for r in skeleton.rows] == ["pa1", "pa2"]

    def test_union_is_exact_multiset(self):
        (skeleton,) = merge_categories([SAVOIAS], "Sav. Scenes")
        assert [r.image_id for r in skeleton.rows] == ["v1", "v2"]
        assert [r.rating for r in skeleton.rows] == [10.0, 30.0]

    def test_unknown_category_rejected(self):
        scheme = GroupingScheme(name="bad", select=(("ic9600", ("plants",)),))
        with pytest.raises(GroupingError, match="plants"):
            merge_categories([IC9600], scheme)

    def test_unknown_dataset_rejected(self):
        scheme = GroupingScheme(name="bad", select=(("nope", None),))
        with pytest.raises(GroupingError, match="nope"):
            merge_categories([IC9600], scheme)

    def test_unknown_builtin_name(self):
        with pytest.raises(GroupingError, match="unknown grouping"):
            merge_categories([IC9600], "IC9600 Everything")

    def test_all_eight_builtins_exist(self):
        assert set(BUILTIN_GROUPINGS) == {
            "RSIVL", "Sav. Scenes", "IC9. Scenes", "Sav. Art",
            "Sav. Suprematism", "IC9. Paintings", "VISC", "Sav. Int"}

    def test_multiple_groupings(self):
        skeletons = merge_categories([SAVOIAS], ["Sav. Art", "Sav. Int"])
        assert [s.name for s in skeletons] == ["Sav. Art", "Sav. Int"]


class TestJoin:
    def _features_for(self, skeleton, extra_ids=()):
        out = {}
        for i, row in enumerate(skeleton.rows):
            out[row.image_id] = feature_vector(row.image_id, 10 + i, i)
        for j, image_id in enumerate(extra_ids):
            out[image_id] = feature_vector(image_id, 99, j)
        return out

    def test_full_coverage(self):
        (skeleton,) = merge_categories([SAVOIAS], "Sav. Int")
        skeleton = normalize_skeleton(skeleton)
        image_set = join_features(skeleton, self._features_for(skeleton))
        assert image_set.ids() == ["v6", "v7"]
        assert image_set.ratings().tolist() == [100.0, 0.0]

    def test_missing_id_reported(self):
        (skeleton,) = merge_categories([SAVOIAS], "Sav. Suprematism")
        features = self._features_for(skeleton)
        del features["v4"]
        with pytest.raises(MissingFeaturesError, match="v4"):
            join_features(skeleton, features)

    def test_extra_features_ignored(self, caplog):
        (skeleton,) = merge_categories([SAVOIAS], "Sav. Suprematism")
        features = self._features_for(skeleton, extra_ids=("ghost1", "ghost2"))
        image_set = join_features(skeleton, features)
        assert set(image_set.ids()) == {"v4", "v5"}

    def test_pipeline_order_merge_normalize_join(self):
        sets = build_image_sets([SAVOIAS], ["Sav. Suprematism"],
                                self._features_for(merge_categories([SAVOIAS], "Sav. Suprematism")[0]))
        (image_set,) = sets
        # normalization happened per merged set: 20 -> 0, 80 -> 100
        assert image_set.ratings().tolist() == [0.0, 100.0]


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "manifest.csv"
        write_manifest(path, SAVOIAS)
        loaded = read_manifest(path, name="savoias")
        assert loaded == SAVOIAS

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,path,cat,rating\na,b,c,1\n")
        with pytest.raises(ManifestError, match="header"):
            read_manifest(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "image_id,image_path,category,raw_rating,rater_count\n"
            "a,a.png,scenes,1.0,\n"
            "a,a2.png,scenes,2.0,\n")
        with pytest.raises(ManifestError, match="duplicate"):
            read_manifest(path)

    def test_non_numeric_rating_rejected(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text(
            "image_id,image_path,category,raw_rating,rater_count\n"
            "a,a.png,scenes,high,\n")
        with pytest.raises(ManifestError, match="not a number"):
            read_manifest(path)

    def test_rater_count_optional(self, tmp_path):
        path = tmp_path / "rc.csv"
        path.write_text(
            "image_id,image_path,category,raw_rating,rater_count\n"
            "a,a.png,scenes,1.0,17\n"
            "b,b.png,scenes,2.0,\n")
        loaded = read_manifest(path)
        assert loaded.rows[0].rater_count == 17
        assert loaded.rows[1].rater_count is None
