/* tslint:disable */
/* eslint-disable */

export class DenoiseOutcome {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    cleaned_rgba(): Uint8Array;
    corrupted(): number;
    jaccard_after(): number;
    jaccard_before(): number;
    noisy_rgba(): Uint8Array;
    restored(): number;
}

/**
 * A generated map: the degraded scan and its exact labels.
 */
export class SyntheticMap {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Class names joined by newlines, in index order.
     */
    class_names(): string;
    /**
     * Replaces `percent` of the labels with a different random class, then
     * cleans them with `policy` (e.g. `mode:3,open:3,close:3`).
     */
    corrupt_and_denoise(percent: number, policy: string, seed: bigint): DenoiseOutcome;
    height(): number;
    /**
     * The scan-like rendering.
     */
    image_rgba(): Uint8Array;
    /**
     * Ground truth in palette colors.
     */
    labels_rgba(): Uint8Array;
    constructor(width: number, height: number, regions: number, classes: number, noise: number, ink: boolean, clutter: number, seed: bigint);
    width(): number;
}

/**
 * Tile rectangles as flat `[x, y, x, y, …]` top-left corners.
 */
export function tile_corners(width: number, height: number, tile: number, overlap: number): Uint32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_denoiseoutcome_free: (a: number, b: number) => void;
    readonly __wbg_syntheticmap_free: (a: number, b: number) => void;
    readonly denoiseoutcome_cleaned_rgba: (a: number) => [number, number];
    readonly denoiseoutcome_corrupted: (a: number) => number;
    readonly denoiseoutcome_jaccard_after: (a: number) => number;
    readonly denoiseoutcome_jaccard_before: (a: number) => number;
    readonly denoiseoutcome_noisy_rgba: (a: number) => [number, number];
    readonly denoiseoutcome_restored: (a: number) => number;
    readonly syntheticmap_class_names: (a: number) => [number, number];
    readonly syntheticmap_corrupt_and_denoise: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly syntheticmap_height: (a: number) => number;
    readonly syntheticmap_image_rgba: (a: number) => [number, number];
    readonly syntheticmap_labels_rgba: (a: number) => [number, number];
    readonly syntheticmap_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
    readonly syntheticmap_width: (a: number) => number;
    readonly tile_corners: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
