/* tslint:disable */
/* eslint-disable */

/**
 * Membrane potential before reset and the spike train of one neuron.
 */
export class LifTrace {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    potential(): Float64Array;
    spikes(): Uint8Array;
}

/**
 * A generated scene rendered two ways: ground truth and the first three
 * principal components as RGB.
 */
export class SceneView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Cumulative explained-variance ratio for 1..=bands components.
     */
    explained(): Float64Array;
    height(): number;
    labels(): Uint16Array;
    /**
     * `width · height · 4` bytes, ready for `ImageData`.
     */
    pca_rgba(): Uint8Array;
    width(): number;
}

export function lif_trace(decay: number, threshold: number, current: number, on_steps: number, steps: number): LifTrace;

export function surrogate_curve(kind: string, lambda: number, lo: number, hi: number, n: number): Float64Array;

export function synthetic_scene(classes: number, size: number, bands: number, separation: number, noise: number, seed: number): SceneView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_liftrace_free: (a: number, b: number) => void;
    readonly __wbg_sceneview_free: (a: number, b: number) => void;
    readonly lif_trace: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly liftrace_potential: (a: number) => [number, number];
    readonly liftrace_spikes: (a: number) => [number, number];
    readonly sceneview_explained: (a: number) => [number, number];
    readonly sceneview_height: (a: number) => number;
    readonly sceneview_labels: (a: number) => [number, number];
    readonly sceneview_pca_rgba: (a: number) => [number, number];
    readonly sceneview_width: (a: number) => number;
    readonly surrogate_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly synthetic_scene: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
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
