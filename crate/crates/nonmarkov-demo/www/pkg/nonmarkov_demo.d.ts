/* tslint:disable */
/* eslint-disable */

/**
 * Averaged correlation profile of the XY steady state with its fitted decay.
 */
export class Profile {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly distances: Float64Array;
    readonly exponent: number;
    /**
     * `algebraic`, `exponential`, or `unresolved` when too few points lie
     * above the numerical floor.
     */
    readonly kind: string;
    readonly length: number;
    readonly values: Float64Array;
}

export function nonmarkovianity_vs_bias(sites: number, gamma_left: number, gamma_right: number, temperature: number, bias_min: number, bias_max: number, points: number): Float64Array;

export function rate_trace(sites: number, gamma_left: number, gamma_right: number, temperature: number, mu_left: number, mu_right: number, t_max: number, points: number): Float64Array;

export function xy_profile(sites: number, anisotropy: number, field: number, delta_h: number, gamma: number, infinite_bias: boolean): Profile;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_profile_free: (a: number, b: number) => void;
    readonly nonmarkovianity_vs_bias: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly profile_distances: (a: number) => [number, number];
    readonly profile_exponent: (a: number) => number;
    readonly profile_kind: (a: number) => [number, number];
    readonly profile_length: (a: number) => number;
    readonly profile_values: (a: number) => [number, number];
    readonly rate_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly xy_profile: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
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
