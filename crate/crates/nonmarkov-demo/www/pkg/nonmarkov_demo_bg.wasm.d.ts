/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_profile_free: (a: number, b: number) => void;
export const nonmarkovianity_vs_bias: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const profile_distances: (a: number) => [number, number];
export const profile_exponent: (a: number) => number;
export const profile_kind: (a: number) => [number, number];
export const profile_length: (a: number) => number;
export const profile_values: (a: number) => [number, number];
export const rate_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const xy_profile: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
