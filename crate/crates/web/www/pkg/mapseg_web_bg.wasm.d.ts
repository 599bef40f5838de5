/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_denoiseoutcome_free: (a: number, b: number) => void;
export const __wbg_syntheticmap_free: (a: number, b: number) => void;
export const denoiseoutcome_cleaned_rgba: (a: number) => [number, number];
export const denoiseoutcome_corrupted: (a: number) => number;
export const denoiseoutcome_jaccard_after: (a: number) => number;
export const denoiseoutcome_jaccard_before: (a: number) => number;
export const denoiseoutcome_noisy_rgba: (a: number) => [number, number];
export const denoiseoutcome_restored: (a: number) => number;
export const syntheticmap_class_names: (a: number) => [number, number];
export const syntheticmap_corrupt_and_denoise: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const syntheticmap_height: (a: number) => number;
export const syntheticmap_image_rgba: (a: number) => [number, number];
export const syntheticmap_labels_rgba: (a: number) => [number, number];
export const syntheticmap_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
export const syntheticmap_width: (a: number) => number;
export const tile_corners: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
