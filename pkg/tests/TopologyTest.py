# CovapSim.Topology test suite

"""Unit test for CovapSim.Topology"""

from fractions import Fraction
import json
import unittest

from TLib import VGG_BUCKET_NUMELS, make_temp_file

from CovapSim.Defaults import DEFAULTS
from CovapSim.Topology import LayerSpec, ModelSpec, TopologyError, \
    allocate_buckets, even_slices, load_model, median_numel, \
    model_from_dict, plan_to_dict, shard_plan, uniform_model


def vgg_bucket_model():
    """six layers, one per bucket at the default 25 MiB capacity"""
    return ModelSpec([LayerSpec("b%d" % idx, numel)
                      for idx, numel in enumerate(VGG_BUCKET_NUMELS)],
                     name="vgg19")


class TopologyTest(unittest.TestCase):

    def test_000_layerspec(self):
        """test LayerSpec validation"""
        layer = LayerSpec("fc", 1000, 2)
        self.assertEqual(layer.nbytes, 2000)
        self.assertRaises(TopologyError, LayerSpec, "fc", 0)
        self.assertRaises(TopologyError, LayerSpec, "fc", 10.5)
        self.assertRaises(TopologyError, LayerSpec, "fc", True)
        self.assertRaises(TopologyError, LayerSpec, "fc", 10, 8)
        self.assertRaises(TopologyError, LayerSpec, "fc", 10, 4, -1.0)

    def test_001_empty_model(self):
        """test empty model is rejected"""
        self.assertRaises(TopologyError, ModelSpec, [])

    def test_002_single_bucket(self):
        """test layers fitting the capacity share one bucket"""
        model = ModelSpec([LayerSpec("a", 10), LayerSpec("b", 20),
                           LayerSpec("c", 30)])
        plan = allocate_buckets(model, 1000)
        self.assertEqual(len(plan.buckets), 1)
        self.assertEqual(plan.buckets[0].layer_refs, (0, 1, 2))
        self.assertEqual(plan.buckets[0].numel, 60)
        self.assertEqual(plan.buckets[0].bytes, 240)

    def test_003_greedy_order(self):
        """test greedy packing keeps backward order and capacity"""
        model = ModelSpec([LayerSpec("l%d" % idx, numel) for idx, numel
                           in enumerate([10, 10, 10, 25, 5, 40])])
        plan = allocate_buckets(model, 100)
        self.assertEqual([b.layer_refs for b in plan.buckets],
                         [(0, 1), (2,), (3,), (4,), (5,)])
        refs = [ref for bucket in plan.buckets for ref in bucket.layer_refs]
        self.assertEqual(refs, list(range(6)))
        for bucket in plan.buckets:
            if len(bucket.layer_refs) > 1:
                self.assertTrue(bucket.bytes <= 100)

    def test_004_oversized_layer(self):
        """test a layer larger than the capacity gets its own bucket"""
        model = ModelSpec([LayerSpec("a", 10), LayerSpec("big", 1000),
                           LayerSpec("c", 10)])
        plan = allocate_buckets(model, 100)
        self.assertEqual([b.layer_refs for b in plan.buckets],
                         [(0,), (1,), (2,)])
        self.assertEqual(plan.buckets[1].bytes, 4000)

    def test_005_vgg_buckets_buckets(self):
        """test VGG-19 bucket sizes at the default capacity"""
        plan = allocate_buckets(vgg_bucket_model())
        self.assertEqual([b.numel for b in plan.buckets], VGG_BUCKET_NUMELS)
        self.assertEqual(plan.cap_bytes, 26214400)

    def test_006_median_paired_low(self):
        """test the default median convention gives 5590260"""
        plan = allocate_buckets(vgg_bucket_model())
        self.assertEqual(median_numel(plan), Fraction(5590260))
        self.assertEqual(median_numel(plan, 'paired-low'), 5590260)

    def test_007_median_middle(self):
        """test the textbook median of six buckets"""
        plan = allocate_buckets(vgg_bucket_model())
        self.assertEqual(median_numel(plan, 'middle'), 7374592)

    def test_008_median_small(self):
        """test medians of one, two and three buckets"""
        one = allocate_buckets(uniform_model(1, 7), 1)
        self.assertEqual(median_numel(one), 7)
        two = allocate_buckets(ModelSpec([LayerSpec("a", 3),
                                          LayerSpec("b", 4)]), 1)
        self.assertEqual(median_numel(two), Fraction(7, 2))
        three = allocate_buckets(ModelSpec([LayerSpec("a", 9),
                                            LayerSpec("b", 1),
                                            LayerSpec("c", 5)]), 1)
        self.assertEqual(median_numel(three), 5)
        self.assertRaises(TopologyError, median_numel, two, 'mean')

    def test_009_shard_vgg_buckets(self):
        """test I=19 turns six VGG-19 buckets into 26 tensors"""
        plan = shard_plan(allocate_buckets(vgg_bucket_model()), 19)
        sharded = plan.sharded_buckets()
        self.assertEqual(sorted(sharded), [1, 2])
        self.assertEqual(len(sharded[1]), 3)
        self.assertEqual(len(sharded[2]), 19)
        self.assertEqual(plan.num_tensors, 26)
        self.assertEqual(plan.interval, 19)

    def test_010_shard_small_interval(self):
        """test shard count is capped by the interval"""
        plan = shard_plan(allocate_buckets(vgg_bucket_model()), 2)
        sharded = plan.sharded_buckets()
        self.assertEqual(len(sharded[1]), 2)
        self.assertEqual(len(sharded[2]), 2)
        self.assertEqual(plan.num_tensors, 8)
        # middle median: 2 and 14 shards
        plan = shard_plan(allocate_buckets(vgg_bucket_model()), 19, 'middle')
        self.assertEqual(plan.num_tensors, 20)

    def test_011_shard_cover(self):
        """test shards exactly cover their bucket, sizes differ by <= 1"""
        plan = shard_plan(allocate_buckets(vgg_bucket_model()), 19)
        for index, shards in plan.sharded_buckets().items():
            bucket = plan.buckets[index]
            self.assertEqual(shards[0].start, 0)
            self.assertEqual(shards[-1].end, bucket.numel)
            for prev, nxt in zip(shards, shards[1:]):
                self.assertEqual(prev.end, nxt.start)
            sizes = [shard.numel for shard in shards]
            self.assertTrue(max(sizes) - min(sizes) <= 1)
        self.assertEqual(sum(plan.numels()), sum(VGG_BUCKET_NUMELS))

    def test_012_interval_one(self):
        """test I=1 never shards"""
        plan = shard_plan(allocate_buckets(vgg_bucket_model()), 1)
        self.assertEqual(plan.num_tensors, 6)
        self.assertEqual(plan.numels(), VGG_BUCKET_NUMELS)
        self.assertRaises(TopologyError, shard_plan,
                          allocate_buckets(vgg_bucket_model()), 0)

    def test_013_single_bucket_no_shard(self):
        """test a single bucket is its own median and is not sharded"""
        plan = shard_plan(allocate_buckets(uniform_model(1, 1000)), 8)
        self.assertEqual(plan.num_tensors, 1)

    def test_014_even_slices(self):
        """test even_slices remainder placement"""
        self.assertEqual(even_slices(10, 3), [(0, 4), (4, 7), (7, 10)])
        self.assertEqual(even_slices(4, 4), [(0, 1), (1, 2), (2, 3),
                                             (3, 4)])

    def test_015_offsets_bytes(self):
        """test offsets and byte sizes of effective tensors"""
        model = ModelSpec([LayerSpec("a", 8, 2), LayerSpec("b", 100, 2)])
        plan = shard_plan(allocate_buckets(model, 16), 4)
        # median of two buckets is 54, bucket b is not sharded
        self.assertEqual(plan.offsets(), [(0, 8), (8, 108)])
        self.assertEqual(plan.tensor_bytes(), [16, 200])

    def test_016_backward_times(self):
        """test backward times follow buckets and shards"""
        model = ModelSpec([LayerSpec("a", 10, 4, 1.0),
                           LayerSpec("b", 10, 4, 3.0),
                           LayerSpec("c", 100, 4, 8.0)])
        plan = allocate_buckets(model, 80)
        self.assertEqual(plan.tensor_backward_ms(), [4.0, 8.0])
        self.assertTrue(model.has_backward_times())
        plan = allocate_buckets(uniform_model(3, 10), 40)
        self.assertEqual(plan.tensor_backward_ms(), None)

    def test_017_model_from_dict(self):
        """test model descriptions"""
        model, cap = model_from_dict({"name": "m", "bucket_cap_bytes": 64,
                                      "layers": [{"param_count": 4},
                                                 {"name": "fc",
                                                  "param_count": 8,
                                                  "bytes_per_param": 2}]})
        self.assertEqual(cap, 64)
        self.assertEqual(model.name, "m")
        self.assertEqual([l.name for l in model.layers], ["layer0", "fc"])
        self.assertEqual(model.total_bytes, 32)
        model, cap = model_from_dict({"uniform_layers": {
            "count": 16, "param_count": 2790906}})
        self.assertEqual(cap, None)
        self.assertEqual(len(model), 16)
        self.assertEqual(model.total_params, 16 * 2790906)
        self.assertRaises(TopologyError, model_from_dict, [])
        self.assertRaises(TopologyError, model_from_dict, {"layers": [{}]})
        self.assertRaises(TopologyError, model_from_dict, {"layers": []})
        self.assertRaises(TopologyError, model_from_dict,
                          {"uniform_layers": {"count": 2}})

    def test_018_load_model_file(self):
        """test loading a model file"""
        doc = {"layers": [{"param_count": 100}, {"param_count": 200}]}
        tmp = make_temp_file(json.dumps(doc).encode('ascii'), '.json')
        model, cap = load_model(tmp.name)
        self.assertEqual(len(model), 2)
        self.assertEqual(cap, None)
        bad = make_temp_file(b'{"layers": [', '.json')
        self.assertRaises(TopologyError, load_model, bad.name)

    def test_019_uniform_resnet(self):
        """test 16 uniform layers pack into 8 buckets at 25 MiB"""
        model = uniform_model(16, 2790906)
        plan = shard_plan(allocate_buckets(model), 3)
        self.assertEqual(len(plan.buckets), 8)
        self.assertEqual(plan.num_tensors, 8)

    def test_020_plan_to_dict(self):
        """test plan serialization"""
        model = vgg_bucket_model()
        doc = plan_to_dict(shard_plan(allocate_buckets(model), 19), model)
        self.assertEqual(doc["effective_tensors"], 26)
        self.assertEqual(doc["median_exact"], "5590260")
        self.assertEqual(doc["buckets"][0]["layer_names"], ["b0"])
        self.assertEqual(len(doc["buckets"][2]["shards"]), 19)
        self.assertEqual(doc["buckets"][0]["shards"], [])
        json.dumps(doc)

    def test_021_plan_median_convention(self):
        """test plan serialization names its median convention"""
        model = vgg_bucket_model()
        doc = plan_to_dict(shard_plan(allocate_buckets(model), 19), model)
        self.assertEqual(doc["median_convention"], "paired-low")
        saved = DEFAULTS.median_convention
        DEFAULTS.median_convention = 'middle'
        try:
            doc = plan_to_dict(allocate_buckets(model), model)
            self.assertEqual(doc["median_convention"], "middle")
            self.assertEqual(doc["median_exact"], "7374592")
        finally:
            DEFAULTS.median_convention = saved
