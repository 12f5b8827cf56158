/* @ts-self-types="./kcme_wasm.d.ts" */

export class PriceComparison {
    static __wrap(ptr) {
        const obj = Object.create(PriceComparison.prototype);
        obj.__wbg_ptr = ptr;
        PriceComparisonFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        PriceComparisonFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_pricecomparison_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get cme_millis() {
        const ret = wasm.__wbg_get_pricecomparison_cme_millis(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get cme_price() {
        const ret = wasm.__wbg_get_pricecomparison_cme_price(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get european_price() {
        const ret = wasm.__wbg_get_pricecomparison_european_price(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get european_std_error() {
        const ret = wasm.__wbg_get_pricecomparison_european_std_error(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get ls_millis() {
        const ret = wasm.__wbg_get_pricecomparison_ls_millis(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get ls_price() {
        const ret = wasm.__wbg_get_pricecomparison_ls_price(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get rank_x() {
        const ret = wasm.__wbg_get_pricecomparison_rank_x(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get rank_y() {
        const ret = wasm.__wbg_get_pricecomparison_rank_y(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @param {number} arg0
     */
    set cme_millis(arg0) {
        wasm.__wbg_set_pricecomparison_cme_millis(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set cme_price(arg0) {
        wasm.__wbg_set_pricecomparison_cme_price(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set european_price(arg0) {
        wasm.__wbg_set_pricecomparison_european_price(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set european_std_error(arg0) {
        wasm.__wbg_set_pricecomparison_european_std_error(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set ls_millis(arg0) {
        wasm.__wbg_set_pricecomparison_ls_millis(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set ls_price(arg0) {
        wasm.__wbg_set_pricecomparison_ls_price(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set rank_x(arg0) {
        wasm.__wbg_set_pricecomparison_rank_x(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set rank_y(arg0) {
        wasm.__wbg_set_pricecomparison_rank_y(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) PriceComparison.prototype[Symbol.dispose] = PriceComparison.prototype.free;

/**
 * Fits `E[exp(-Y^2/2) | X = x]` for `Y = a X + sigma Z` from `n` draws and
 * returns `[x..., fitted..., exact...]` on `grid_points` points in `[-2.5, 2.5]`.
 * @param {number} n
 * @param {number} a
 * @param {number} sigma
 * @param {number} epsilon
 * @param {number} grid_points
 * @param {bigint} seed
 * @returns {Float64Array}
 */
export function conditional_mean_curve(n, a, sigma, epsilon, grid_points, seed) {
    const ret = wasm.conditional_mean_curve(n, a, sigma, epsilon, grid_points, seed);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v1;
}

/**
 * American put under the default Heston parameters (with rate `r`), priced
 * by the low-rank CME recursion and by Longstaff–Schwartz on the same paths.
 * @param {number} n_paths
 * @param {number} maturity
 * @param {number} strike
 * @param {number} r
 * @param {number} epsilon
 * @param {bigint} seed
 * @returns {PriceComparison}
 */
export function price_put(n_paths, maturity, strike, r, epsilon, seed) {
    const ret = wasm.price_put(n_paths, maturity, strike, r, epsilon, seed);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return PriceComparison.__wrap(ret[0]);
}

/**
 * For each tolerance: `[epsilon, rank_x, rank_y, residual_y / trace(K_Y)]`,
 * flattened.
 * @param {number} n_paths
 * @param {number} maturity
 * @param {bigint} seed
 * @param {Float64Array} epsilons
 * @returns {Float64Array}
 */
export function rank_profile(n_paths, maturity, seed, epsilons) {
    const ptr0 = passArrayF64ToWasm0(epsilons, wasm.__wbindgen_malloc);
    const len0 = WASM_VECTOR_LEN;
    const ret = wasm.rank_profile(n_paths, maturity, seed, ptr0, len0);
    if (ret[3]) {
        throw takeFromExternrefTable0(ret[2]);
    }
    var v2 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v2;
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_is_undefined_8865fb403f8fe9d8: function(arg0) {
            const ret = arg0 === undefined;
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbg_now_e7c6795a7f81e10f: function(arg0) {
            const ret = arg0.now();
            return ret;
        },
        __wbg_performance_3fcf6e32a7e1ed0a: function(arg0) {
            const ret = arg0.performance;
            return ret;
        },
        __wbg_static_accessor_GLOBAL_266715b9d96ba635: function() {
            const ret = typeof global === 'undefined' ? null : global;
            return isLikeNone(ret) ? 0 : addToExternrefTable0(ret);
        },
        __wbg_static_accessor_GLOBAL_THIS_10fb7dc1ae063179: function() {
            const ret = typeof globalThis === 'undefined' ? null : globalThis;
            return isLikeNone(ret) ? 0 : addToExternrefTable0(ret);
        },
        __wbg_static_accessor_SELF_0b583911f537483a: function() {
            const ret = typeof self === 'undefined' ? null : self;
            return isLikeNone(ret) ? 0 : addToExternrefTable0(ret);
        },
        __wbg_static_accessor_WINDOW_d7f903d1508cbdc4: function() {
            const ret = typeof window === 'undefined' ? null : window;
            return isLikeNone(ret) ? 0 : addToExternrefTable0(ret);
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./kcme_wasm_bg.js": import0,
    };
}

const PriceComparisonFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_pricecomparison_free(ptr, 1));

function addToExternrefTable0(obj) {
    const idx = wasm.__externref_table_alloc();
    wasm.__wbindgen_externrefs.set(idx, obj);
    return idx;
}

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function isLikeNone(x) {
    return x === undefined || x === null;
}

function passArrayF64ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 8, 8) >>> 0;
    getFloat64ArrayMemory0().set(arg, ptr / 8);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let WASM_VECTOR_LEN = 0;

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('kcme_wasm_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
