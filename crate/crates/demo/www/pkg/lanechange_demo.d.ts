/* tslint:disable */
/* eslint-disable */

/**
 * Stochastic three-lane traffic, car following only.
 */
export class TrafficView {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances `n` steps of 0.1 s.
     */
    advance(n: number): void;
    constructor(seed: bigint);
    road_width(): number;
    segment_length(): number;
    time(): number;
    /**
     * Flat `[x, y, v, ...]` for every vehicle on the road.
     */
    vehicles(): Float64Array;
}

export function idm_curve(speed: number, leader_speed: number, v_limit_kmh: number, max_gap: number): Float64Array;

/**
 * Greedy lane-change rollout for the page: flat rows of
 * `[t, y, theta, omega, a_yaw]` followed by `[done, total_return]`.
 */
export function lane_change(checkpoint: string, speed: number, target: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trafficview_free: (a: number, b: number) => void;
    readonly idm_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly lane_change: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly trafficview_advance: (a: number, b: number) => [number, number];
    readonly trafficview_new: (a: bigint) => [number, number, number];
    readonly trafficview_road_width: (a: number) => number;
    readonly trafficview_segment_length: (a: number) => number;
    readonly trafficview_time: (a: number) => number;
    readonly trafficview_vehicles: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
