/**
 * Control-to-message binding tables for the four panels.
 *
 * Two conductor panels own the machine pads, loop toggles and the tempo
 * buttons; two crane panels step the rectangle path, move the hook
 * between heights and fire the shake pads.  Clip and gesture ids match
 * the demo scene (`panstage make-demo`); edit here to rebind.
 */

import { buildCrane, buildLoop, buildShake, buildTempo, buildTrig } from "./protocol.js";

export type Panel = "Conductor1" | "Conductor2" | "Crane1" | "Crane2";

export type ControlKind = "pad" | "loop" | "tempo" | "crane" | "shake";

export interface PanelBinding {
  control: string;
  label: string;
  panel: Panel;
  kind: ControlKind;
  /** Wire lines for one interaction; loop toggles take their new state. */
  messages(payload?: boolean): string[];
}

export const BINDINGS: PanelBinding[] = [
  {
    control: "pad_hit_a",
    label: "machine A hit",
    panel: "Conductor1",
    kind: "pad",
    messages: () => [buildTrig("hit_a")],
  },
  {
    control: "loop_a",
    label: "machine A loop",
    panel: "Conductor1",
    kind: "loop",
    messages: (on?: boolean) => [buildLoop("loop_a", on ?? true)],
  },
  {
    control: "tempo_up",
    label: "tempo +",
    panel: "Conductor1",
    kind: "tempo",
    messages: () => [buildTempo(1)],
  },
  {
    control: "tempo_down",
    label: "tempo -",
    panel: "Conductor1",
    kind: "tempo",
    messages: () => [buildTempo(-1)],
  },
  {
    control: "pad_hit_b",
    label: "machine B hit",
    panel: "Conductor2",
    kind: "pad",
    messages: () => [buildTrig("hit_b")],
  },
  {
    control: "loop_b",
    label: "machine B loop",
    panel: "Conductor2",
    kind: "loop",
    messages: (on?: boolean) => [buildLoop("loop_b", on ?? true)],
  },
  {
    control: "crane_next",
    label: "crane: next corner",
    panel: "Crane1",
    kind: "crane",
    messages: () => [buildCrane("next")],
  },
  {
    control: "shake_maracas",
    label: "shake: maracas",
    panel: "Crane1",
    kind: "shake",
    // a press synthesizes the accelerometer excursion: past the
    // threshold, then back inside the resting range
    messages: () => [buildShake("maracas", 1.4), buildShake("maracas", 0.0)],
  },
  {
    control: "crane_up",
    label: "crane: height up",
    panel: "Crane2",
    kind: "crane",
    messages: () => [buildCrane("up")],
  },
  {
    control: "crane_down",
    label: "crane: height down",
    panel: "Crane2",
    kind: "crane",
    messages: () => [buildCrane("down")],
  },
  {
    control: "shake_udu",
    label: "shake: udu",
    panel: "Crane2",
    kind: "shake",
    messages: () => [buildShake("udu", 1.4), buildShake("udu", 0.0)],
  },
];

/** Room-floor extents the listener pad maps onto, meters. */
export const ROOM_HALF_WIDTH = 4.8;
export const ROOM_HALF_DEPTH = 1.5;
export const LISTENER_EAR_HEIGHT = 1.7;

/**
 * Map pad fractions (0..1 across, 0..1 down; top = front of the room)
 * onto room-floor meters.
 */
export function padToRoom(fx: number, fy: number): { x: number; y: number } {
  const clamp = (v: number) => Math.min(Math.max(v, 0), 1);
  return {
    x: round2((clamp(fx) * 2 - 1) * ROOM_HALF_WIDTH),
    y: round2((1 - clamp(fy) * 2) * ROOM_HALF_DEPTH),
  };
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}
