/* tslint:disable */
/* eslint-disable */

export function compareSolvers(shots: number, seeds: number, noise: number, data_seed: number): string;

export function noiseSweep(levels: Float64Array, seeds: number): string;

export function sinkhornTrace(classes: number, samples: number, scale: number, skew: number, iters: number, seed: number): string;

export function solverNames(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compareSolvers: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly noiseSweep: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sinkhornTrace: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly solverNames: () => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
