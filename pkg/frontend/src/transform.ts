/**
 * Bird's-eye mapping between vehicle-frame meters and canvas pixels.
 * Vehicle +x (forward) points up on screen, vehicle +y (left) points left.
 */
export class ViewTransform {
  constructor(
    public centerX = 10.0, // meters, vehicle frame
    public centerY = 0.0,
    public scale = 18.0, // pixels per meter
    public width = 900,
    public height = 700,
  ) {}

  worldToScreen(x: number, y: number): [number, number] {
    return [
      this.width / 2 - (y - this.centerY) * this.scale,
      this.height / 2 - (x - this.centerX) * this.scale,
    ];
  }

  screenToWorld(sx: number, sy: number): [number, number] {
    return [
      this.centerX + (this.height / 2 - sy) / this.scale,
      this.centerY + (this.width / 2 - sx) / this.scale,
    ];
  }

  /** Shift the view by a pixel delta (drag panning). */
  panByPixels(dxPx: number, dyPx: number): void {
    this.centerY += dxPx / this.scale;
    this.centerX += dyPx / this.scale;
  }

  /** Zoom by `factor`, keeping the world point under (sx, sy) fixed. */
  zoomAt(sx: number, sy: number, factor: number): void {
    const [wx, wy] = this.screenToWorld(sx, sy);
    this.scale = Math.min(400, Math.max(1, this.scale * factor));
    this.centerX = wx - (this.height / 2 - sy) / this.scale;
    this.centerY = wy - (this.width / 2 - sx) / this.scale;
  }
}
