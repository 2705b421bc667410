/**
 * Wire-protocol text handling for the control surface.
 *
 * The UI speaks the engine's datagram grammar through the localhost HTTP
 * bridge; every outbound line is built here and validated against the
 * same grammar the engine's parser enforces, so the client can never
 * invent a message shape the server would reject.
 */

const ID_RE = /^[A-Za-z0-9_][A-Za-z0-9_.\-]*$/;
const FLOAT_RE = /^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/;

export const MAX_DATAGRAM_BYTES = 512;

function fmt(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error(`non-finite value ${value}`);
  }
  // keep plain decimal notation; the grammar allows exponents but plain
  // decimals read better in logs
  const text = value.toString();
  return FLOAT_RE.test(text) ? text : value.toFixed(6);
}

export function buildTempo(direction: 1 | -1): string {
  return `TEMPO ${direction > 0 ? "+" : "-"}`;
}

export function buildTrig(clipId: string): string {
  requireId(clipId, "clip id");
  return `TRIG ${clipId}`;
}

export function buildLoop(loopId: string, on: boolean): string {
  requireId(loopId, "loop id");
  return `LOOP ${loopId} ${on ? "ON" : "OFF"}`;
}

export function buildShake(gestureId: string, value: number): string {
  requireId(gestureId, "gesture id");
  return `SHAKE ${gestureId} ${fmt(value)}`;
}

export function buildCrane(action: "next" | "up" | "down"): string {
  return `CRANE ${action.toUpperCase()}`;
}

export function buildPosListener(x: number, y: number, z: number, yaw: number): string {
  return `POS LISTENER ${fmt(x)} ${fmt(y)} ${fmt(z)} ${fmt(yaw)}`;
}

export function buildPosSource(id: string, x: number, y: number, z: number): string {
  requireId(id, "source id");
  return `POS SOURCE ${id} ${fmt(x)} ${fmt(y)} ${fmt(z)}`;
}

function requireId(id: string, what: string): void {
  if (!ID_RE.test(id)) {
    throw new Error(`bad ${what}: ${JSON.stringify(id)}`);
  }
}

/**
 * Local mirror of the engine's grammar; returns null when valid, or a
 * reason string.  The authoritative check is the live parser behind
 * POST /control; this one exists so unit tests and the send path can
 * reject malformed lines before they leave the browser.
 */
export function validateMessage(line: string): string | null {
  if (new TextEncoder().encode(line).length > MAX_DATAGRAM_BYTES) {
    return "datagram too long";
  }
  const tokens = line.trim().split(/\s+/);
  const [verb, ...rest] = tokens;
  const isFloat = (t: string | undefined) => t !== undefined && FLOAT_RE.test(t);
  const isId = (t: string | undefined) => t !== undefined && ID_RE.test(t);
  switch (verb) {
    case "POS":
      if (rest[0] === "LISTENER") {
        return rest.length === 5 && rest.slice(1).every(isFloat) ? null : "bad POS LISTENER";
      }
      if (rest[0] === "SOURCE") {
        return rest.length === 5 && isId(rest[1]) && rest.slice(2).every(isFloat)
          ? null
          : "bad POS SOURCE";
      }
      return "bad POS target";
    case "TRIG":
      return rest.length === 1 && isId(rest[0]) ? null : "bad TRIG";
    case "LOOP":
      return rest.length === 2 && isId(rest[0]) && (rest[1] === "ON" || rest[1] === "OFF")
        ? null
        : "bad LOOP";
    case "TEMPO":
      return rest.length === 1 && (rest[0] === "+" || rest[0] === "-") ? null : "bad TEMPO";
    case "SHAKE":
      return rest.length === 2 && isId(rest[0]) && isFloat(rest[1]) ? null : "bad SHAKE";
    case "CRANE":
      return rest.length === 1 && ["NEXT", "UP", "DOWN"].includes(rest[0] ?? "")
        ? null
        : "bad CRANE";
    case "STATUS":
      return rest.length === 0 ? null : "bad STATUS";
    default:
      return `unknown verb ${JSON.stringify(verb)}`;
  }
}

export interface EngineStatus {
  bpm: number;
  room: string;
  loops: string[];
  step: number;
  shakes: number;
  dropped: number;
  meters: number[];
}

/**
 * Parse the engine's one-line STATUS reply:
 * `BPM <f> ROOM <NAME> LOOPS <n> [<id>...] STEP <i> SHAKES <n> DROPPED <n>
 *  METERS <8 floats>`
 */
export function parseStatusLine(line: string): EngineStatus {
  const tokens = line.trim().split(/\s+/);
  const take = (key: string, at: number): string => {
    if (tokens[at] !== key) {
      throw new Error(`expected ${key} at token ${at} in ${JSON.stringify(line)}`);
    }
    const value = tokens[at + 1];
    if (value === undefined) {
      throw new Error(`missing value for ${key}`);
    }
    return value;
  };
  const bpm = Number(take("BPM", 0));
  const room = take("ROOM", 2);
  const loopCount = Number(take("LOOPS", 4));
  if (!Number.isInteger(loopCount) || loopCount < 0) {
    throw new Error(`bad loop count in ${JSON.stringify(line)}`);
  }
  const loops = tokens.slice(6, 6 + loopCount);
  let at = 6 + loopCount;
  const step = Number(take("STEP", at));
  const shakes = Number(take("SHAKES", at + 2));
  const dropped = Number(take("DROPPED", at + 4));
  if (tokens[at + 6] !== "METERS") {
    throw new Error(`expected METERS in ${JSON.stringify(line)}`);
  }
  const meters = tokens.slice(at + 7).map(Number);
  if (meters.length !== 8 || meters.some(Number.isNaN)) {
    throw new Error(`bad meters in ${JSON.stringify(line)}`);
  }
  return { bpm, room: room.toLowerCase(), loops, step, shakes, dropped, meters };
}
