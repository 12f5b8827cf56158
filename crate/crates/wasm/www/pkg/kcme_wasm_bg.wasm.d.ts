/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_get_pricecomparison_cme_millis: (a: number) => number;
export const __wbg_get_pricecomparison_cme_price: (a: number) => number;
export const __wbg_get_pricecomparison_european_price: (a: number) => number;
export const __wbg_get_pricecomparison_european_std_error: (a: number) => number;
export const __wbg_get_pricecomparison_ls_millis: (a: number) => number;
export const __wbg_get_pricecomparison_ls_price: (a: number) => number;
export const __wbg_get_pricecomparison_rank_x: (a: number) => number;
export const __wbg_get_pricecomparison_rank_y: (a: number) => number;
export const __wbg_pricecomparison_free: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_cme_millis: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_cme_price: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_european_price: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_european_std_error: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_ls_millis: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_ls_price: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_rank_x: (a: number, b: number) => void;
export const __wbg_set_pricecomparison_rank_y: (a: number, b: number) => void;
export const conditional_mean_curve: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const price_put: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const rank_profile: (a: number, b: number, c: bigint, d: number, e: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
