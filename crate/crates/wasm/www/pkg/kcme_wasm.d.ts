/* tslint:disable */
/* eslint-disable */

export class PriceComparison {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    cme_millis: number;
    cme_price: number;
    european_price: number;
    european_std_error: number;
    ls_millis: number;
    ls_price: number;
    rank_x: number;
    rank_y: number;
}

/**
 * Fits `E[exp(-Y^2/2) | X = x]` for `Y = a X + sigma Z` from `n` draws and
 * returns `[x..., fitted..., exact...]` on `grid_points` points in `[-2.5, 2.5]`.
 */
export function conditional_mean_curve(n: number, a: number, sigma: number, epsilon: number, grid_points: number, seed: bigint): Float64Array;

/**
 * American put under the default Heston parameters (with rate `r`), priced
 * by the low-rank CME recursion and by Longstaff–Schwartz on the same paths.
 */
export function price_put(n_paths: number, maturity: number, strike: number, r: number, epsilon: number, seed: bigint): PriceComparison;

/**
 * For each tolerance: `[epsilon, rank_x, rank_y, residual_y / trace(K_Y)]`,
 * flattened.
 */
export function rank_profile(n_paths: number, maturity: number, seed: bigint, epsilons: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_get_pricecomparison_cme_millis: (a: number) => number;
    readonly __wbg_get_pricecomparison_cme_price: (a: number) => number;
    readonly __wbg_get_pricecomparison_european_price: (a: number) => number;
    readonly __wbg_get_pricecomparison_european_std_error: (a: number) => number;
    readonly __wbg_get_pricecomparison_ls_millis: (a: number) => number;
    readonly __wbg_get_pricecomparison_ls_price: (a: number) => number;
    readonly __wbg_get_pricecomparison_rank_x: (a: number) => number;
    readonly __wbg_get_pricecomparison_rank_y: (a: number) => number;
    readonly __wbg_pricecomparison_free: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_cme_millis: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_cme_price: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_european_price: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_european_std_error: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_ls_millis: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_ls_price: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_rank_x: (a: number, b: number) => void;
    readonly __wbg_set_pricecomparison_rank_y: (a: number, b: number) => void;
    readonly conditional_mean_curve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly price_put: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly rank_profile: (a: number, b: number, c: bigint, d: number, e: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
