/*
 * Minimal ffmpeg-CLI-compatible encode/decode shim built on the FFmpeg
 * libraries (libavformat/libavcodec/libavutil).
 *
 * Supports exactly the invocation patterns used by the cubevid codec
 * bridge, so a machine that has the FFmpeg shared libraries but no
 * ffmpeg executable can still encode and decode:
 *
 *   encode:  ffshim -y -f rawvideo -pix_fmt PF -video_size WxH
 *                   -framerate N -i - -c:v ENCODER [-key value ...] OUT
 *   decode:  ffshim -i IN -f rawvideo -pix_fmt PF -
 *   probe:   ffshim -i IN            (stream info on stderr, exit 1,
 *                                     mirroring ffmpeg's behaviour)
 *   version: ffshim -version
 *
 * Raw frames travel over stdin/stdout as packed planar images in the
 * canonical libavutil layout (av_image_copy_to_buffer with align=1),
 * which is byte-identical to what the real ffmpeg CLI produces for the
 * rawvideo (de)muxer. Unknown "-key value" pairs between "-i -" and the
 * output path are passed to the encoder as AVOptions, like ffmpeg does;
 * leftovers that no component consumed are a hard error.
 */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/dict.h>
#include <libavutil/imgutils.h>
#include <libavutil/opt.h>
#include <libavutil/pixdesc.h>

#define SHIM_VERSION "1.0"

static void die(const char *msg, int err)
{
    if (err < 0) {
        char buf[256];
        av_strerror(err, buf, sizeof(buf));
        fprintf(stderr, "ffshim: %s: %s\n", msg, buf);
    } else {
        fprintf(stderr, "ffshim: %s\n", msg);
    }
    exit(1);
}

/* ------------------------------------------------------------------ */
/* argument parsing                                                    */

typedef struct {
    const char *in;          /* input path or "-" */
    const char *out;         /* output path or "-" or NULL */
    const char *pix_fmt;
    const char *video_size;
    const char *framerate;
    const char *encoder;
    AVDictionary *enc_opts;  /* passthrough encoder/muxer options */
    AVDictionary *meta;      /* -metadata key=value pairs */
} Args;

static int is_flag(const char *a, const char *name) { return strcmp(a, name) == 0; }

static void parse_args(int argc, char **argv, Args *o)
{
    memset(o, 0, sizeof(*o));
    int i = 1;
    int after_input = 0;
    while (i < argc) {
        const char *a = argv[i];
        if (is_flag(a, "-y") || is_flag(a, "-hide_banner") || is_flag(a, "-nostdin")) {
            i++;
        } else if (is_flag(a, "-loglevel") || is_flag(a, "-vsync") || is_flag(a, "-r")) {
            if (is_flag(a, "-loglevel") && i + 1 < argc) {
                if (!strcmp(argv[i + 1], "error")) av_log_set_level(AV_LOG_ERROR);
                else if (!strcmp(argv[i + 1], "quiet")) av_log_set_level(AV_LOG_QUIET);
            }
            i += 2;
        } else if (is_flag(a, "-f")) {
            /* rawvideo on whichever side of -i it appears; value unused */
            i += 2;
        } else if (is_flag(a, "-pix_fmt")) {
            if (i + 1 >= argc) die("-pix_fmt needs a value", 0);
            o->pix_fmt = argv[i + 1]; i += 2;
        } else if (is_flag(a, "-video_size") || is_flag(a, "-s")) {
            if (i + 1 >= argc) die("-video_size needs a value", 0);
            o->video_size = argv[i + 1]; i += 2;
        } else if (is_flag(a, "-framerate")) {
            if (i + 1 >= argc) die("-framerate needs a value", 0);
            o->framerate = argv[i + 1]; i += 2;
        } else if (is_flag(a, "-i")) {
            if (i + 1 >= argc) die("-i needs a value", 0);
            o->in = argv[i + 1]; after_input = 1; i += 2;
        } else if (is_flag(a, "-c:v") || is_flag(a, "-codec:v") || is_flag(a, "-vcodec")) {
            if (i + 1 >= argc) die("-c:v needs a value", 0);
            o->encoder = argv[i + 1]; i += 2;
        } else if (is_flag(a, "-metadata")) {
            if (i + 1 >= argc) die("-metadata needs key=value", 0);
            char *kv = av_strdup(argv[i + 1]);
            char *eq = strchr(kv, '=');
            if (!eq) die("-metadata expects key=value", 0);
            *eq = 0;
            av_dict_set(&o->meta, kv, eq + 1, 0);
            av_free(kv);
            i += 2;
        } else if (is_flag(a, "-version")) {
            printf("ffshim %s (libavcodec %s)\n", SHIM_VERSION, av_version_info());
            exit(0);
        } else if (a[0] == '-' && a[1] != '\0') {
            /* passthrough encoder option: -key value */
            if (i + 1 >= argc) die("option missing value", 0);
            if (!after_input) die("unexpected option before -i", 0);
            av_dict_set(&o->enc_opts, a + 1, argv[i + 1], 0);
            i += 2;
        } else {
            /* bare token: output path (or "-") */
            if (o->out) die("multiple outputs given", 0);
            o->out = a; i++;
        }
    }
    if (!o->in) die("no input given (-i)", 0);
}

/* ------------------------------------------------------------------ */
/* encode: raw planar frames from stdin -> encoded file                */

static void write_packets(AVFormatContext *oc, AVCodecContext *enc, AVStream *st)
{
    AVPacket *pkt = av_packet_alloc();
    for (;;) {
        int ret = avcodec_receive_packet(enc, pkt);
        if (ret == AVERROR(EAGAIN) || ret == AVERROR_EOF) break;
        if (ret < 0) die("error receiving packet from encoder", ret);
        av_packet_rescale_ts(pkt, enc->time_base, st->time_base);
        pkt->stream_index = st->index;
        ret = av_interleaved_write_frame(oc, pkt);
        if (ret < 0) die("error writing packet", ret);
    }
    av_packet_free(&pkt);
}

static int run_encode(const Args *a)
{
    if (!a->pix_fmt || !a->video_size || !a->encoder || !a->out)
        die("encode needs -pix_fmt, -video_size, -c:v and an output path", 0);

    int w = 0, h = 0;
    if (sscanf(a->video_size, "%dx%d", &w, &h) != 2 || w < 1 || h < 1)
        die("bad -video_size", 0);
    enum AVPixelFormat fmt = av_get_pix_fmt(a->pix_fmt);
    if (fmt == AV_PIX_FMT_NONE) die("unknown pix_fmt", 0);
    int fps = a->framerate ? atoi(a->framerate) : 25;
    if (fps < 1) die("bad -framerate", 0);

    const AVCodec *codec = avcodec_find_encoder_by_name(a->encoder);
    if (!codec) die("encoder not found", 0);

    AVFormatContext *oc = NULL;
    int ret = avformat_alloc_output_context2(&oc, NULL, NULL, a->out);
    if (ret < 0 || !oc) die("cannot create output context (extension?)", ret);

    AVCodecContext *enc = avcodec_alloc_context3(codec);
    enc->width = w;
    enc->height = h;
    enc->pix_fmt = fmt;
    enc->time_base = (AVRational){1, fps};
    enc->framerate = (AVRational){fps, 1};
    if (oc->oformat->flags & AVFMT_GLOBALHEADER)
        enc->flags |= AV_CODEC_FLAG_GLOBAL_HEADER;

    AVDictionary *opts = NULL;
    av_dict_copy(&opts, a->enc_opts, 0);
    ret = avcodec_open2(enc, codec, &opts);
    if (ret < 0) die("cannot open encoder", ret);
    if (av_dict_count(opts) > 0) {
        AVDictionaryEntry *e = NULL;
        while ((e = av_dict_get(opts, "", e, AV_DICT_IGNORE_SUFFIX)))
            fprintf(stderr, "ffshim: option not consumed by encoder: %s\n", e->key);
        die("unrecognized encoder option(s)", 0);
    }
    av_dict_free(&opts);

    AVStream *st = avformat_new_stream(oc, NULL);
    if (!st) die("cannot create stream", 0);
    st->time_base = enc->time_base;
    ret = avcodec_parameters_from_context(st->codecpar, enc);
    if (ret < 0) die("cannot copy codec parameters", ret);

    av_dict_copy(&oc->metadata, a->meta, 0);

    if (!(oc->oformat->flags & AVFMT_NOFILE)) {
        ret = avio_open(&oc->pb, a->out, AVIO_FLAG_WRITE);
        if (ret < 0) die("cannot open output file", ret);
    }
    ret = avformat_write_header(oc, NULL);
    if (ret < 0) die("cannot write header", ret);

    int frame_bytes = av_image_get_buffer_size(fmt, w, h, 1);
    if (frame_bytes <= 0) die("bad frame geometry", frame_bytes);
    uint8_t *buf = av_malloc(frame_bytes);

    AVFrame *frame = av_frame_alloc();
    frame->format = fmt;
    frame->width = w;
    frame->height = h;
    ret = av_frame_get_buffer(frame, 0);
    if (ret < 0) die("cannot allocate frame", ret);

    int64_t n = 0;
    for (;;) {
        size_t got = fread(buf, 1, (size_t)frame_bytes, stdin);
        if (got == 0) break;
        if (got != (size_t)frame_bytes) die("truncated raw frame on stdin", 0);

        uint8_t *src_data[4];
        int src_linesize[4];
        ret = av_image_fill_arrays(src_data, src_linesize, buf, fmt, w, h, 1);
        if (ret < 0) die("cannot map raw frame", ret);

        ret = av_frame_make_writable(frame);
        if (ret < 0) die("frame not writable", ret);
        av_image_copy(frame->data, frame->linesize,
                      (const uint8_t **)src_data, src_linesize, fmt, w, h);
        frame->pts = n++;

        ret = avcodec_send_frame(enc, frame);
        if (ret < 0) die("error sending frame to encoder", ret);
        write_packets(oc, enc, st);
    }
    if (n == 0) die("no input frames", 0);

    ret = avcodec_send_frame(enc, NULL);
    if (ret < 0) die("error flushing encoder", ret);
    write_packets(oc, enc, st);

    ret = av_write_trailer(oc);
    if (ret < 0) die("error writing trailer", ret);

    if (!(oc->oformat->flags & AVFMT_NOFILE))
        avio_closep(&oc->pb);
    av_frame_free(&frame);
    av_free(buf);
    avcodec_free_context(&enc);
    avformat_free_context(oc);
    return 0;
}

/* ------------------------------------------------------------------ */
/* decode / probe                                                      */

static AVFormatContext *open_input(const Args *a, int *vstream,
                                   AVCodecContext **dec_out)
{
    AVFormatContext *ic = NULL;
    int ret = avformat_open_input(&ic, a->in, NULL, NULL);
    if (ret < 0) die("cannot open input", ret);
    ret = avformat_find_stream_info(ic, NULL);
    if (ret < 0) die("cannot read stream info", ret);

    int vs = av_find_best_stream(ic, AVMEDIA_TYPE_VIDEO, -1, -1, NULL, 0);
    if (vs < 0) die("no video stream found", vs);
    const AVCodec *dec = avcodec_find_decoder(ic->streams[vs]->codecpar->codec_id);
    if (!dec) die("no decoder for video stream", 0);

    AVCodecContext *dctx = avcodec_alloc_context3(dec);
    ret = avcodec_parameters_to_context(dctx, ic->streams[vs]->codecpar);
    if (ret < 0) die("cannot init decoder parameters", ret);
    ret = avcodec_open2(dctx, dec, NULL);
    if (ret < 0) die("cannot open decoder", ret);

    *vstream = vs;
    *dec_out = dctx;
    return ic;
}

static int run_probe(const Args *a)
{
    int vs;
    AVCodecContext *dctx;
    AVFormatContext *ic = open_input(a, &vs, &dctx);

    /* One frame must decode so the reported pix_fmt is authoritative. */
    AVPacket *pkt = av_packet_alloc();
    AVFrame *frame = av_frame_alloc();
    enum AVPixelFormat fmt = dctx->pix_fmt;
    int w = dctx->width, h = dctx->height;
    while (av_read_frame(ic, pkt) >= 0) {
        if (pkt->stream_index == vs) {
            if (avcodec_send_packet(dctx, pkt) >= 0 &&
                avcodec_receive_frame(dctx, frame) >= 0) {
                fmt = frame->format;
                w = frame->width;
                h = frame->height;
                av_packet_unref(pkt);
                break;
            }
        }
        av_packet_unref(pkt);
    }

    fprintf(stderr, "Input #0, %s, from '%s':\n", ic->iformat->name, a->in);
    fprintf(stderr, "    Stream #0:0: Video: %s, %s, %dx%d\n",
            avcodec_get_name(dctx->codec_id),
            fmt != AV_PIX_FMT_NONE ? av_get_pix_fmt_name(fmt) : "none", w, h);
    fprintf(stderr, "At least one output file must be specified\n");
    return 1; /* same exit status as ffmpeg -i without outputs */
}

static int run_decode(const Args *a)
{
    if (!a->pix_fmt) die("decode needs -pix_fmt", 0);
    enum AVPixelFormat want = av_get_pix_fmt(a->pix_fmt);
    if (want == AV_PIX_FMT_NONE) die("unknown pix_fmt", 0);

    int vs;
    AVCodecContext *dctx;
    AVFormatContext *ic = open_input(a, &vs, &dctx);

    AVPacket *pkt = av_packet_alloc();
    AVFrame *frame = av_frame_alloc();
    uint8_t *buf = NULL;
    int buf_size = 0;
    int64_t n = 0;

    int draining = 0;
    for (;;) {
        if (!draining) {
            int ret = av_read_frame(ic, pkt);
            if (ret == AVERROR_EOF) {
                draining = 1;
                avcodec_send_packet(dctx, NULL);
            } else if (ret < 0) {
                die("error reading packet", ret);
            } else {
                if (pkt->stream_index != vs) {
                    av_packet_unref(pkt);
                    continue;
                }
                ret = avcodec_send_packet(dctx, pkt);
                av_packet_unref(pkt);
                if (ret < 0) die("error sending packet to decoder", ret);
            }
        }
        for (;;) {
            int ret = avcodec_receive_frame(dctx, frame);
            if (ret == AVERROR(EAGAIN)) break;
            if (ret == AVERROR_EOF) goto done;
            if (ret < 0) die("error decoding frame", ret);

            if (frame->format != want)
                die("stream pix_fmt does not match requested -pix_fmt", 0);
            if (!buf) {
                buf_size = av_image_get_buffer_size(want, frame->width,
                                                    frame->height, 1);
                if (buf_size <= 0) die("bad frame geometry", buf_size);
                buf = av_malloc(buf_size);
            }
            ret = av_image_copy_to_buffer(buf, buf_size,
                                          (const uint8_t **)frame->data,
                                          frame->linesize, want,
                                          frame->width, frame->height, 1);
            if (ret < 0) die("cannot serialize frame", ret);
            if (fwrite(buf, 1, (size_t)buf_size, stdout) != (size_t)buf_size)
                die("short write on stdout", 0);
            n++;
        }
        if (draining && n == 0) break;
    }
done:
    if (n == 0) die("no frames decoded", 0);
    fflush(stdout);
    av_free(buf);
    av_frame_free(&frame);
    av_packet_free(&pkt);
    avcodec_free_context(&dctx);
    avformat_close_input(&ic);
    return 0;
}

/* ------------------------------------------------------------------ */

int main(int argc, char **argv)
{
    if (argc < 2) {
        fprintf(stderr, "ffshim %s: encode/decode shim for the cubevid codec bridge\n",
                SHIM_VERSION);
        return 1;
    }
    Args a;
    parse_args(argc, argv, &a);

    int rc;
    if (strcmp(a.in, "-") == 0)
        rc = run_encode(&a);
    else if (a.out && strcmp(a.out, "-") == 0)
        rc = run_decode(&a);
    else if (!a.out)
        rc = run_probe(&a);
    else
        die("unsupported invocation (expected encode, decode or probe form)", 0);

    av_dict_free(&a.enc_opts);
    av_dict_free(&a.meta);
    return rc;
}
