/**
 * Top-down 2D canvas rendering of the session view: lane centerlines,
 * planned trajectory, ego vehicle, detected objects, light states and the
 * engagement badge. Drawing goes through a minimal context interface so
 * tests can pass a recording double instead of a real canvas.
 */

import { TelemetryFrame } from "./protocol.js";
import { SessionView } from "./view.js";

/** Subset of CanvasRenderingContext2D the renderer needs. */
export interface DrawContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Viewport {
  /** Map meters per canvas pixel. */
  scale: number;
  /** Map point rendered at the canvas center. */
  centerX: number;
  centerY: number;
}

const BADGE_COLORS: Record<string, string> = {
  engaged: "#2e7d32",
  manual: "#616161",
  fault: "#c62828",
};

const LIGHT_COLORS: Record<string, string> = {
  red: "#e53935",
  yellow: "#fdd835",
  green: "#43a047",
  unknown: "#9e9e9e",
};

export function viewportFollowing(frame: TelemetryFrame | null,
                                  scale = 0.5): Viewport {
  if (frame === null) return { scale, centerX: 0, centerY: 0 };
  return { scale, centerX: frame.state.x, centerY: frame.state.y };
}

function toCanvas(vp: Viewport, width: number, height: number,
                  x: number, y: number): [number, number] {
  // map +y (north/left of lane) points up on screen
  return [
    width / 2 + (x - vp.centerX) / vp.scale,
    height / 2 - (y - vp.centerY) / vp.scale,
  ];
}

function drawPolyline(ctx: DrawContext, vp: Viewport, width: number,
                      height: number, points: Array<[number, number]>): void {
  if (points.length < 2) return;
  ctx.beginPath();
  const first = points[0]!;
  ctx.moveTo(...toCanvas(vp, width, height, first[0], first[1]));
  for (let i = 1; i < points.length; i++) {
    const p = points[i]!;
    ctx.lineTo(...toCanvas(vp, width, height, p[0], p[1]));
  }
  ctx.stroke();
}

export function render(view: SessionView, ctx: DrawContext,
                       width: number, height: number,
                       vp: Viewport = viewportFollowing(view.frame)): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#111418";
  ctx.fillRect(0, 0, width, height);

  ctx.strokeStyle = "#455a64";
  ctx.lineWidth = 1;
  for (const lane of view.lanes) {
    drawPolyline(ctx, vp, width, height, lane);
  }

  const frame = view.frame;
  if (frame !== null) {
    const dimmed = view.engagement.mode !== "engaged";
    ctx.strokeStyle = dimmed ? "#33691e" : "#7cb342";
    ctx.lineWidth = 2;
    drawPolyline(ctx, vp, width, height, frame.trajectory);

    ctx.fillStyle = "#ef6c00";
    for (const obj of frame.objects) {
      for (const [x, y, radius] of obj.circles) {
        const [cx, cy] = toCanvas(vp, width, height, x, y);
        ctx.beginPath();
        ctx.arc(cx, cy, Math.max(radius / vp.scale, 2), 0, 2 * Math.PI);
        ctx.fill();
      }
    }

    const [ex, ey] = toCanvas(vp, width, height, frame.state.x, frame.state.y);
    ctx.fillStyle = "#29b6f6";
    ctx.beginPath();
    ctx.arc(ex, ey, 5, 0, 2 * Math.PI);
    ctx.fill();

    let lightY = 40;
    ctx.font = "12px sans-serif";
    for (const [site, color] of Object.entries(frame.lights)) {
      ctx.fillStyle = LIGHT_COLORS[color] ?? LIGHT_COLORS.unknown!;
      ctx.beginPath();
      ctx.arc(width - 90, lightY, 5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#eceff1";
      ctx.fillText(site, width - 78, lightY + 4);
      lightY += 18;
    }

    ctx.fillStyle = "#eceff1";
    ctx.fillText(`t=${frame.t.toFixed(1)}s  v=${frame.state.speed.toFixed(1)} m/s`,
                 10, height - 12);
  }

  // engagement badge: always the last server-acknowledged state
  const mode = view.engagement.mode;
  ctx.fillStyle = BADGE_COLORS[mode] ?? BADGE_COLORS.manual!;
  ctx.fillRect(10, 10, 110, 26);
  ctx.fillStyle = "#ffffff";
  ctx.font = "bold 13px sans-serif";
  ctx.fillText(mode.toUpperCase(), 20, 28);
  if (mode !== "engaged" && view.engagement.reason) {
    ctx.font = "11px sans-serif";
    ctx.fillStyle = "#ffab91";
    ctx.fillText(view.engagement.reason, 130, 28);
  }

  ctx.fillStyle = "#90a4ae";
  ctx.font = "11px sans-serif";
  ctx.fillText(`link: ${view.connectionState}`
               + (view.errorCount > 0 ? `  errors: ${view.errorCount}` : ""),
               10, 52);
}
