"""Scene: crane automation, the room-switch state machine, config parsing."""

import math

import pytest

from panstage.errors import ConfigError
from panstage.geometry import Vec3
from panstage.scene import (
    CraneAutomation,
    RoomSwitcher,
    clamp_source_position,
    parse_scene_file,
)

CORNERS = ((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0))


def make_crane(speed=1.0):
    return CraneAutomation(corners=CORNERS, heights=(1.0, 2.0, 3.0), speed=speed)


class TestCrane:
    def test_next_reaches_corner(self):
        crane = make_crane()
        assert crane.apply("next")
        pos = crane.update(10.0)  # plenty of time
        assert (pos.x, pos.y) == (2.0, 0.0)
        assert crane.waypoint_index == 1

    def test_linear_interpolation_midpoint(self):
        crane = make_crane(speed=1.0)
        crane.apply("next")  # toward (2, 0), 2 m away
        pos = crane.update(0.5)
        # independent linear-motion oracle: s = v * t along the segment
        assert pos.x == pytest.approx(0.0 + 1.0 * 0.5 / 2.0 * 2.0)
        assert pos.y == 0.0
        pos = crane.update(0.75)
        assert pos.x == pytest.approx(1.25)

    def test_height_clamped_at_top(self):
        crane = make_crane()
        assert crane.apply("up")
        assert crane.apply("up")
        assert crane.height_index == 2
        assert not crane.apply("up")  # clamped: ignored, no trigger
        assert crane.height_index == 2

    def test_height_motion(self):
        crane = make_crane(speed=2.0)
        crane.apply("up")
        pos = crane.update(0.25)
        assert pos.z == pytest.approx(1.5)
        pos = crane.update(10.0)
        assert pos.z == 2.0

    def test_z_stays_within_height_range(self):
        crane = make_crane(speed=3.0)
        rng_actions = ["up", "up", "down", "next", "up", "down", "down", "down"]
        for action in rng_actions:
            crane.apply(action)
            pos = crane.update(0.21)
            assert 1.0 - 1e-9 <= pos.z <= 3.0 + 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            CraneAutomation(corners=CORNERS[:3], heights=(1.0, 2.0, 3.0))
        with pytest.raises(ValueError):
            CraneAutomation(corners=CORNERS, heights=(1.0, 1.0, 3.0))


class TestRoomSwitcher:
    def test_left_selects_factory(self):
        sw = RoomSwitcher(initial="church")
        sw.update(-1.0, 256)
        assert sw.state.active == "factory"

    def test_right_selects_church(self):
        sw = RoomSwitcher(initial="factory")
        sw.update(1.0, 256)
        assert sw.state.active == "church"

    def test_hysteresis_band_holds(self):
        sw = RoomSwitcher(initial="factory")
        for x in (0.05, -0.05, 0.09, -0.09, 0.0):
            sw.update(x, 256)
        assert sw.state.active == "factory"
        assert sw.switch_count == 0

    def test_one_switch_per_crossfade(self):
        sw = RoomSwitcher(initial="factory", crossfade_seconds=0.05, sample_rate=48000.0)
        # oscillate hard across the boundary every block
        flips = 0
        last = sw.state.active
        for i in range(40):
            x = 1.0 if i % 2 == 0 else -1.0
            sw.update(x, 256)
            if sw.state.active != last:
                flips += 1
                last = sw.state.active
        # 50 ms fade = 9.375 blocks: at most one switch per completed fade
        assert flips <= 4
        assert sw.switch_count == flips

    def test_fade_gains_power_complementary(self):
        sw = RoomSwitcher(initial="factory")
        sw.update(1.0, 256)
        mid = sw.update(1.0, 1200)
        gains = sw.fade_gains()
        assert set(gains) == {"church", "factory"}
        total = sum(g * g for g in gains.values())
        assert total == pytest.approx(1.0, abs=1e-12)


class TestSceneFile:
    def test_studio_scene(self, studio):
        scene = parse_scene_file(studio / "scene.txt")
        assert set(scene.sources) == {"src_a", "src_b", "pad", "crane"}
        assert scene.crane_source_id == "crane"
        assert scene.crane.heights == (1.0, 2.0, 2.8)
        assert scene.clip_to_source["tone440"] == "src_a"
        assert scene.shake_bindings["maracas"] == ("pad", "shaker")
        assert scene.clip_manifest.name == "clips.txt"
        # crane source snapped to the first corner at the lowest height
        assert scene.sources["crane"].position == Vec3(-3.0, -0.5, 1.0)

    def test_unknown_source_reference(self, tmp_path):
        f = tmp_path / "scene.txt"
        f.write_text("bind ghost clip1\n")
        with pytest.raises(ConfigError) as err:
            parse_scene_file(f)
        assert ":1:" in str(err.value)

    def test_bad_kind(self, tmp_path):
        f = tmp_path / "scene.txt"
        f.write_text("source a robot 0 0 1\n")
        with pytest.raises(ConfigError):
            parse_scene_file(f)

    def test_duplicate_clip_binding(self, tmp_path):
        f = tmp_path / "scene.txt"
        f.write_text(
            "source a machine_a 0 0 1\nsource b machine_b 1 0 1\n"
            "bind a clip1\nbind b clip1\n"
        )
        with pytest.raises(ConfigError) as err:
            parse_scene_file(f)
        assert ":4:" in str(err.value)


class TestClamping:
    def test_source_margin(self):
        p = clamp_source_position(Vec3(100.0, -100.0, 50.0), 9.6, 3.0, 3.0)
        assert (p.x, p.y, p.z) == (6.8, -3.5, 5.0)
