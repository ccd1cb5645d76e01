/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_trafficview_free: (a: number, b: number) => void;
export const idm_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const lane_change: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const trafficview_advance: (a: number, b: number) => [number, number];
export const trafficview_new: (a: bigint) => [number, number, number];
export const trafficview_road_width: (a: number) => number;
export const trafficview_segment_length: (a: number) => number;
export const trafficview_time: (a: number) => number;
export const trafficview_vehicles: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
