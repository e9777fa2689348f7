export interface RadarEntry {
  index: number;
  x_m: number;
  y_m: number;
  z_m: number;
  w_lm: number | null;
  w_cm: number | null;
  w_opt: number | null;
  w_tr: number | null;
  w_fused: number | null;
  y_hat: number | null;
  y_corrected: number | null;
}

export interface FramePayload {
  sequence: string;
  frame_ts_ns: number;
  labeled: boolean;
  radar: RadarEntry[];
  lidar: number[][];
  flags: string[];
}

export interface SequenceInfo {
  id: string;
  frame_count: number;
  reviewed_count: number;
}

export interface FrameInfo {
  frame_ts_ns: number;
  reviewed: boolean;
}

export interface Correction {
  detection_index: number;
  y: number;
}
