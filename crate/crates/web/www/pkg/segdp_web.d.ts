/* tslint:disable */
/* eslint-disable */

/**
 * JSON `{eps, delta}` for the shuffled Poisson randomizer.
 */
export function divergenceCurve(lambda: number, d: number, n: bigint, m: number, eps_max: number, points: number): string;

/**
 * JSON `[{m, rates, bound}]` over a log grid of blanket rates.
 */
export function rateProfile(n: bigint, d: number, s: number, levels: string, fractions: string, m_min: number, m_max: number, points: number): string;

/**
 * JSON `{m, rates, estimates, truth, mse, bound}` for one run on synthetic data.
 */
export function simulate(n: number, d: number, s: number, levels: string, fractions: string, m: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly divergenceCurve: (a: number, b: number, c: bigint, d: number, e: number, f: number) => [number, number, number, number];
    readonly rateProfile: (a: bigint, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: bigint) => [number, number, number, number];
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
