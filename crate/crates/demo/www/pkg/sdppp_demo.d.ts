/* tslint:disable */
/* eslint-disable */

/**
 * One branching random walk up to `generations`, as `(generation,
 * position)` pairs: `[g0, x0, g1, x1, ...]`.
 */
export function brw_cloud(law_json: string, generations: number, seed: number): Float64Array;

/**
 * Critical exponent of a law, or an error if there is none.
 */
export function critical_alpha(law_json: string): number;

/**
 * Empirical and semi-analytic CDF of the maximum of the Cox process with
 * intensity `S e^{-alpha x} dx`, on `[-3, 7]`: `[x, empirical,
 * semi_analytic]` triples.
 */
export function max_law_curve(law_json: string, reps: number, seed: number): Float64Array;

/**
 * One SDPPP draw above `floor` with the martingale shift of `law` and a
 * mixture decoration (empty string for a single atom at 0). Returns the
 * atoms in decreasing order.
 */
export function sdppp_points(law_json: string, decoration_json: string, c: number, floor: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly brw_cloud: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly critical_alpha: (a: number, b: number) => [number, number, number];
    readonly max_law_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly sdppp_points: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
