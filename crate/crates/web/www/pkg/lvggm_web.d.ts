/* tslint:disable */
/* eslint-disable */

/**
 * LVGGM against the graphical lasso on one chain-plus-latent instance.
 */
export function compareEstimators(p: number, r: number, n: number, latent_scale: number, ca: number, cb: number, seed: number): string;

/**
 * Mean effective rank of the marginal covariance across eight energy ratios in [0.1, 10].
 */
export function effrankSweep(p: number, r: number, reps: number, seed: number): string;

/**
 * Frobenius error against rescaled sample size for n in 200..1000.
 */
export function scalingCurve(p: number, r: number, reps: number, ca: number, cb: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compareEstimators: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly effrankSweep: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly scalingCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
