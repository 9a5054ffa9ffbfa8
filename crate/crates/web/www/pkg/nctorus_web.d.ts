/* tslint:disable */
/* eslint-disable */

/**
 * `ln ‖a_Δ ⋆₂ a‖₂` (`kind = "translate"`) or the level-`j` lattice-sum bound
 * (`kind = "lattice"`, tower factors all 2) for the standard Gaussian along
 * `Δ = t·(1, 1)/√2`, `t ∈ [from, to]`, with the log-log fit. JSON.
 */
export function decay_curve(kind: string, from: number, to: number, count: number, level: number): string;

/**
 * `|Σ_γ f(x + mγ)|` on a `grid × grid` sampling of the cell `[0, m)²`, where `f`
 * is `e^{−π w⁻²|x − c|²}`. Row-major, empty on invalid input.
 */
export function periodization_heatmap(m: number, grid: number, cx: number, cy: number, width: number): Float64Array;

/**
 * Residual of the identity relating `e_k ⋆_θ e_l` to the `θ = 2` product,
 * for plane waves `e_k(x) = e^{2πik·x}` on `ℝ²`. JSON.
 */
export function scaling_check(k1: number, k2: number, l1: number, l2: number, theta: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly decay_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly periodization_heatmap: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly scaling_check: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
