/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_liftrace_free: (a: number, b: number) => void;
export const __wbg_sceneview_free: (a: number, b: number) => void;
export const lif_trace: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const liftrace_potential: (a: number) => [number, number];
export const liftrace_spikes: (a: number) => [number, number];
export const sceneview_explained: (a: number) => [number, number];
export const sceneview_height: (a: number) => number;
export const sceneview_labels: (a: number) => [number, number];
export const sceneview_pca_rgba: (a: number) => [number, number];
export const sceneview_width: (a: number) => number;
export const surrogate_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const synthetic_scene: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
